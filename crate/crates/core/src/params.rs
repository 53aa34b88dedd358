//! System parameters, derived quantities and the public evaluation points.
//!
//! Indices are 0-based in the library: user `m`, server `n`, row `i`,
//! round `s` and column `j` all start at zero. The CLI and the JSON formats
//! shift to 1-based numbering at the boundary.

use std::collections::HashMap;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{next_prime, Fe, Field};

/// Rates are exact rationals.
pub type Rate = Ratio<u64>;

/// User-chosen protocol parameters.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Server count N.
    pub n: usize,
    /// MDS dimension K (columns per file).
    pub k: usize,
    /// Storage-security threshold X.
    pub x: usize,
    /// Per-user collusion thresholds T_1..T_M.
    pub t: Vec<usize>,
    /// Byzantine bound B.
    pub b: usize,
    /// Unresponsive bound U.
    pub u: usize,
    /// Per-user index ranges F_1..F_M.
    pub f: Vec<usize>,
    /// When false the dealer noise polynomial is dropped (non-symmetric variant).
    pub server_privacy: bool,
}

impl SystemParams {
    /// The worked example: N=13, M=2, K=2, X=2, T=(2,2), B=1, U=1, F=(2,2).
    pub fn demo() -> Self {
        SystemParams {
            n: 13,
            k: 2,
            x: 2,
            t: vec![2, 2],
            b: 1,
            u: 1,
            f: vec![2, 2],
            server_privacy: true,
        }
    }

    pub fn users(&self) -> usize {
        self.t.len()
    }

    pub fn t_sum(&self) -> usize {
        self.t.iter().sum()
    }

    /// Total number of files F_1 * ... * F_M.
    pub fn file_count(&self) -> usize {
        self.f.iter().product()
    }

    /// K + X + sum(T) + 2B + U - 1; N must exceed this.
    pub fn overhead(&self) -> usize {
        self.k + self.x + self.t_sum() + 2 * self.b + self.u - 1
    }

    /// Number of dealer noise symbols per round, K + X + sum(T) - 1.
    pub fn noise_per_round(&self) -> usize {
        self.k + self.x + self.t_sum() - 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.t.is_empty() {
            return Err(Error::InvalidParams("at least one user is required".into()));
        }
        if self.t.len() != self.f.len() {
            return Err(Error::InvalidParams(format!(
                "{} collusion thresholds but {} index ranges",
                self.t.len(),
                self.f.len()
            )));
        }
        if self.k == 0 {
            return Err(Error::InvalidParams("K must be at least 1".into()));
        }
        if let Some(m) = self.t.iter().position(|&t| t == 0) {
            return Err(Error::InvalidParams(format!(
                "T_{} must be at least 1",
                m + 1
            )));
        }
        if let Some(m) = self.f.iter().position(|&f| f == 0) {
            return Err(Error::InvalidParams(format!(
                "F_{} must be at least 1",
                m + 1
            )));
        }
        if self.n <= self.overhead() {
            return Err(Error::InfeasibleParams {
                n: self.n,
                bound: self.overhead(),
            });
        }
        Ok(())
    }
}

/// Quantities fixed by the parameters.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DerivedParams {
    /// Symbols decodable per round.
    pub p: usize,
    /// Rows per file.
    pub lambda: usize,
    /// Number of rounds.
    pub s: usize,
    /// Symbols per file, lambda * K.
    pub l: usize,
    /// Field modulus.
    pub q: u64,
}

impl DerivedParams {
    /// Dimension of the per-round answer code, lambda + K + X + sum(T) - 1.
    pub fn answer_dimension(&self, p: &SystemParams) -> usize {
        self.lambda + p.k + p.x + p.t_sum() - 1
    }

    /// max{K, lambda}.
    pub fn d_star(&self, p: &SystemParams) -> usize {
        p.k.max(self.lambda)
    }

    /// Smallest admissible modulus, N + max{K, lambda}.
    pub fn min_modulus(&self, p: &SystemParams) -> u64 {
        (p.n + self.d_star(p)) as u64
    }

    pub fn field(&self) -> Field {
        Field::new(self.q).expect("derived modulus is prime")
    }
}

/// Derives (P, lambda, S, L, q) with q the smallest prime >= N + max{K, lambda}.
pub fn derive_params(p: &SystemParams) -> Result<DerivedParams> {
    derive_params_with_modulus(p, None)
}

/// As [`derive_params`], optionally overriding q. The override must be a
/// prime no smaller than N + max{K, lambda}.
pub fn derive_params_with_modulus(p: &SystemParams, q: Option<u64>) -> Result<DerivedParams> {
    p.validate()?;
    let pp = p.n - p.overhead();
    let lambda = pp;
    let min_q = (p.n + p.k.max(lambda)) as u64;
    let q = match q {
        Some(q) => {
            Field::new(q)?;
            if q < min_q {
                return Err(Error::FieldTooSmall { q, required: min_q });
            }
            q
        }
        None => next_prime(min_q),
    };
    Ok(DerivedParams {
        p: pp,
        lambda,
        s: p.k,
        l: lambda * p.k,
        q,
    })
}

/// Closed-form retrieval rate 1 - (K+X+sum(T)+2B-1)/(N-U).
pub fn closed_form_rate(p: &SystemParams) -> Rate {
    let num = (p.k + p.x + p.t_sum() + 2 * p.b - 1) as u64;
    let den = (p.n - p.u) as u64;
    Rate::from_integer(1) - Rate::new(num, den)
}

/// Closed-form secrecy rate (K+X+sum(T)-1)/P, or zero without server privacy.
pub fn closed_form_secrecy_rate(p: &SystemParams) -> Rate {
    if !p.server_privacy {
        return Rate::from_integer(0);
    }
    let pp = (p.n - p.overhead()) as u64;
    Rate::new(p.noise_per_round() as u64, pp)
}

/// The public points: a lambda x (K+X) matrix beta and the N server points alpha.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicPoints {
    pub beta: Vec<Vec<Fe>>,
    pub alpha: Vec<Fe>,
}

impl PublicPoints {
    #[inline]
    pub fn beta(&self, row: usize, col: usize) -> Fe {
        self.beta[row][col]
    }

    /// The lambda entries of column `s` of beta.
    pub fn beta_column(&self, s: usize) -> Vec<Fe> {
        self.beta.iter().map(|r| r[s]).collect()
    }
}

/// Cyclic Latin-rectangle construction using exactly N + max{K, lambda}
/// field values: beta_{i,j} = (i + j) mod d* for data columns, noise column
/// K+x reuses alpha_x, and alpha_n = d* + n.
pub fn generate_public_points(p: &SystemParams, d: &DerivedParams) -> Result<PublicPoints> {
    let required = d.min_modulus(p);
    if d.q < required {
        return Err(Error::FieldTooSmall { q: d.q, required });
    }
    let field = Field::new(d.q)?;
    let d_star = d.d_star(p);
    let alpha: Vec<Fe> = (0..p.n).map(|n| field.elem((d_star + n) as u64)).collect();
    let beta = (0..d.lambda)
        .map(|i| {
            (0..p.k + p.x)
                .map(|j| {
                    if j < p.k {
                        field.elem(((i + j) % d_star) as u64)
                    } else {
                        alpha[j - p.k]
                    }
                })
                .collect()
        })
        .collect();
    Ok(PublicPoints { beta, alpha })
}

/// One violated point condition.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "condition")]
pub enum PointViolation {
    /// Two entries of a beta row coincide.
    P1 { row: usize, cols: (usize, usize) },
    /// Two entries of a data column of beta coincide.
    P2 { col: usize, rows: (usize, usize) },
    /// Two server points coincide.
    P3 { servers: (usize, usize) },
    /// A server point equals a data-column beta entry.
    P4 {
        server: usize,
        row: usize,
        col: usize,
    },
}

/// Checks P1-P4; an empty list means the points are admissible.
pub fn validate_points(
    pts: &PublicPoints,
    p: &SystemParams,
    d: &DerivedParams,
) -> Result<Vec<PointViolation>> {
    let width = p.k + p.x;
    if pts.beta.len() != d.lambda || pts.beta.iter().any(|r| r.len() != width) {
        return Err(Error::ShapeMismatch(format!(
            "beta must be {}x{}",
            d.lambda, width
        )));
    }
    if pts.alpha.len() != p.n {
        return Err(Error::ShapeMismatch(format!(
            "alpha must have {} entries",
            p.n
        )));
    }
    let mut out = Vec::new();
    for (i, row) in pts.beta.iter().enumerate() {
        for a in 0..width {
            for b in a + 1..width {
                if row[a] == row[b] {
                    out.push(PointViolation::P1 {
                        row: i,
                        cols: (a, b),
                    });
                }
            }
        }
    }
    for s in 0..p.k {
        for a in 0..d.lambda {
            for b in a + 1..d.lambda {
                if pts.beta[a][s] == pts.beta[b][s] {
                    out.push(PointViolation::P2 {
                        col: s,
                        rows: (a, b),
                    });
                }
            }
        }
    }
    let mut seen: HashMap<Fe, usize> = HashMap::new();
    for (n, &a) in pts.alpha.iter().enumerate() {
        if let Some(&prev) = seen.get(&a) {
            out.push(PointViolation::P3 { servers: (prev, n) });
        } else {
            seen.insert(a, n);
        }
    }
    for (i, row) in pts.beta.iter().enumerate() {
        for (j, v) in row.iter().enumerate().take(p.k) {
            for (n, a) in pts.alpha.iter().enumerate() {
                if a == v {
                    out.push(PointViolation::P4 {
                        server: n,
                        row: i,
                        col: j,
                    });
                }
            }
        }
    }
    Ok(out)
}
