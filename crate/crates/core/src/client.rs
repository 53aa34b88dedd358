//! User-side query generation.
//!
//! In round `s`, user `m` builds one polynomial of degree `T_m` per
//! `(f_m, j)`: it equals 1 at `beta_{j,s}` for the desired index and 0 for
//! every other index, and takes private uniform noises at `alpha_0..alpha_{T_m}`.

use crate::error::{Error, Result};
use crate::field::Fe;
use crate::params::{DerivedParams, PublicPoints, SystemParams};
use crate::poly::Poly;
use crate::seed::Seed;

/// A user's desired index and private randomness source.
#[derive(Clone, Debug)]
pub struct UserState {
    pub user: usize,
    pub theta: usize,
    seed: Seed,
}

impl UserState {
    pub fn new(p: &SystemParams, user: usize, theta: usize, seed: Seed) -> Result<Self> {
        if user >= p.users() {
            return Err(Error::InvalidParams(format!("no user {user}")));
        }
        if theta >= p.f[user] {
            return Err(Error::InvalidParams(format!(
                "theta {} out of range for user {} (F = {})",
                theta + 1,
                user + 1,
                p.f[user]
            )));
        }
        Ok(UserState { user, theta, seed })
    }

    /// The `F_m * lambda * T_m` private noises of round `s`, laid out
    /// `(f * lambda + j) * T_m + t`. Fresh per round, stateless across rounds.
    pub fn round_noises(&self, p: &SystemParams, d: &DerivedParams, s: usize) -> Vec<Fe> {
        let field = d.field();
        let count = p.f[self.user] * d.lambda * p.t[self.user];
        let mut rng = self.seed.derive(&format!("round/{s}")).rng();
        field.random_vec(&mut rng, count)
    }
}

/// The `F_m * lambda` query polynomials of one user for one round, indexed `f * lambda + j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryPolys {
    pub user: usize,
    pub round: usize,
    lambda: usize,
    polys: Vec<Poly>,
}

impl QueryPolys {
    pub fn get(&self, f: usize, j: usize) -> &Poly {
        &self.polys[f * self.lambda + j]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Poly> {
        self.polys.iter()
    }
}

/// What user `m` sends server `n` in round `s`: `F_m * lambda` evaluations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoundQuery {
    pub user: usize,
    pub server: usize,
    pub round: usize,
    lambda: usize,
    values: Vec<Fe>,
}

impl RoundQuery {
    #[inline]
    pub fn get(&self, f: usize, j: usize) -> Fe {
        self.values[f * self.lambda + j]
    }

    pub fn values(&self) -> &[Fe] {
        &self.values
    }
}

pub fn build_query_polynomials(
    u: &UserState,
    p: &SystemParams,
    d: &DerivedParams,
    pts: &PublicPoints,
    s: usize,
) -> Result<QueryPolys> {
    if s >= d.s {
        return Err(Error::InvalidParams(format!("round {s} out of range")));
    }
    let field = d.field();
    let t = p.t[u.user];
    let noise = u.round_noises(p, d, s);
    let mut polys = Vec::with_capacity(p.f[u.user] * d.lambda);
    for f in 0..p.f[u.user] {
        for j in 0..d.lambda {
            let target = if f == u.theta { Fe::ONE } else { Fe::ZERO };
            let base = (f * d.lambda + j) * t;
            let nodes: Vec<(Fe, Fe)> = std::iter::once((pts.beta(j, s), target))
                .chain((0..t).map(|k| (pts.alpha[k], noise[base + k])))
                .collect();
            polys.push(Poly::interpolate(&field, &nodes)?);
        }
    }
    Ok(QueryPolys {
        user: u.user,
        round: s,
        lambda: d.lambda,
        polys,
    })
}

/// One query per server, in server order.
pub fn emit_queries(
    u: &UserState,
    p: &SystemParams,
    d: &DerivedParams,
    pts: &PublicPoints,
    s: usize,
) -> Result<Vec<RoundQuery>> {
    let polys = build_query_polynomials(u, p, d, pts, s)?;
    Ok(queries_from_polys(&polys, d, pts))
}

pub fn queries_from_polys(
    polys: &QueryPolys,
    d: &DerivedParams,
    pts: &PublicPoints,
) -> Vec<RoundQuery> {
    let field = d.field();
    pts.alpha
        .iter()
        .enumerate()
        .map(|(n, &a)| RoundQuery {
            user: polys.user,
            server: n,
            round: polys.round,
            lambda: d.lambda,
            values: polys.iter().map(|q| q.evaluate(&field, a)).collect(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Field;
    use crate::params::{derive_params, generate_public_points};

    fn demo() -> (SystemParams, DerivedParams, PublicPoints) {
        let p = SystemParams::demo();
        let d = derive_params(&p).unwrap();
        let pts = generate_public_points(&p, &d).unwrap();
        (p, d, pts)
    }

    /// Direct evaluation of the explicit Lagrange form of the query polynomial.
    fn closed_form(
        field: &Field,
        x: Fe,
        beta: Fe,
        alphas: &[Fe],
        noise: &[Fe],
        desired: bool,
    ) -> Fe {
        let t = alphas.len();
        let mut acc = Fe::ZERO;
        for l in 0..t {
            let mut term = field
                .div(field.sub(x, beta), field.sub(alphas[l], beta))
                .unwrap();
            for v in (0..t).filter(|&v| v != l) {
                let r = field
                    .div(field.sub(x, alphas[v]), field.sub(alphas[l], alphas[v]))
                    .unwrap();
                term = field.mul(term, r);
            }
            acc = field.add(acc, field.mul(noise[l], term));
        }
        if desired {
            let mut term = Fe::ONE;
            for &a in alphas {
                term = field.mul(
                    term,
                    field.div(field.sub(x, a), field.sub(beta, a)).unwrap(),
                );
            }
            acc = field.add(acc, term);
        }
        acc
    }

    #[test]
    fn constraints_hold() {
        let (p, d, pts) = demo();
        let field = d.field();
        for m in 0..2 {
            let u = UserState::new(&p, m, 1, Seed::from_u64(10 + m as u64)).unwrap();
            for s in 0..d.s {
                let noise = u.round_noises(&p, &d, s);
                assert_eq!(noise.len(), 2 * 3 * 2);
                let polys = build_query_polynomials(&u, &p, &d, &pts, s).unwrap();
                for f in 0..2 {
                    for j in 0..3 {
                        let q = polys.get(f, j);
                        assert!(q.degree().is_none_or(|deg| deg <= p.t[m]));
                        let want = if f == u.theta { Fe::ONE } else { Fe::ZERO };
                        assert_eq!(q.evaluate(&field, pts.beta(j, s)), want);
                        for t in 0..p.t[m] {
                            assert_eq!(
                                q.evaluate(&field, pts.alpha[t]),
                                noise[(f * 3 + j) * 2 + t]
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn matches_closed_form() {
        let (p, d, pts) = demo();
        let field = d.field();
        let u = UserState::new(&p, 0, 0, Seed::from_u64(3)).unwrap();
        for s in 0..d.s {
            let noise = u.round_noises(&p, &d, s);
            let queries = emit_queries(&u, &p, &d, &pts, s).unwrap();
            assert_eq!(queries.len(), p.n);
            for q in &queries {
                assert_eq!(q.values().len(), 2 * 3);
                for f in 0..2 {
                    for j in 0..3 {
                        let base = (f * 3 + j) * 2;
                        let want = closed_form(
                            &field,
                            pts.alpha[q.server],
                            pts.beta(j, s),
                            &pts.alpha[..2],
                            &noise[base..base + 2],
                            f == u.theta,
                        );
                        assert_eq!(q.get(f, j), want);
                    }
                }
            }
        }
    }

    #[test]
    fn theta_changes_only_deterministic_term() {
        let (p, d, pts) = demo();
        let field = d.field();
        let seed = Seed::from_u64(77);
        let a = UserState::new(&p, 0, 0, seed).unwrap();
        let b = UserState::new(&p, 0, 1, seed).unwrap();
        let s = 1;
        let qa = emit_queries(&a, &p, &d, &pts, s).unwrap();
        let qb = emit_queries(&b, &p, &d, &pts, s).unwrap();
        let zero = [Fe::ZERO; 2];
        for (x, y) in qa.iter().zip(&qb) {
            let at = pts.alpha[x.server];
            for j in 0..3 {
                let det = closed_form(&field, at, pts.beta(j, s), &pts.alpha[..2], &zero, true);
                // user a wants f=0, user b wants f=1
                assert_eq!(field.sub(x.get(0, j), y.get(0, j)), det);
                assert_eq!(field.sub(y.get(1, j), x.get(1, j)), det);
            }
        }
    }

    #[test]
    fn deterministic_and_validated() {
        let (p, d, pts) = demo();
        let u = UserState::new(&p, 1, 0, Seed::from_u64(5)).unwrap();
        assert_eq!(
            emit_queries(&u, &p, &d, &pts, 0).unwrap(),
            emit_queries(&u, &p, &d, &pts, 0).unwrap()
        );
        assert_ne!(
            emit_queries(&u, &p, &d, &pts, 0).unwrap()[5].values(),
            emit_queries(&u, &p, &d, &pts, 1).unwrap()[5].values()
        );
        assert!(UserState::new(&p, 0, 2, Seed::from_u64(1)).is_err());
        assert!(UserState::new(&p, 2, 0, Seed::from_u64(1)).is_err());
        assert!(build_query_polynomials(&u, &p, &d, &pts, 2).is_err());
    }
}
