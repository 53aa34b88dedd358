//! Server-side answer computation and adversarial behaviour.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::client::RoundQuery;
use crate::error::{Error, Result};
use crate::field::{Fe, Field};
use crate::params::{DerivedParams, PublicPoints, SystemParams};
use crate::poly::Poly;
use crate::storage::{tuple_of, StorageShare};

/// Everything server `n` holds: its storage share and one randomness share
/// per round (all zero when server privacy is off).
#[derive(Clone, Debug)]
pub struct ServerState {
    pub server: usize,
    pub storage: StorageShare,
    pub randomness: Vec<Fe>,
}

/// The lambda public polynomials of degree lambda-1 with phi_j(beta_{i,s}) = [i == j].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntermediatePolys {
    pub round: usize,
    pub polys: Vec<Poly>,
}

pub fn build_intermediate_polys(
    d: &DerivedParams,
    pts: &PublicPoints,
    s: usize,
) -> Result<IntermediatePolys> {
    if s >= d.s {
        return Err(Error::InvalidParams(format!("round {s} out of range")));
    }
    let field = d.field();
    let col = pts.beta_column(s);
    let polys = (0..d.lambda)
        .map(|j| Poly::lagrange_basis(&field, &col, j))
        .collect::<Result<_>>()?;
    Ok(IntermediatePolys { round: s, polys })
}

/// A server's reply; `None` when it stays silent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundAnswer {
    pub server: usize,
    pub round: usize,
    pub value: Option<Fe>,
}

/// Honest answer: sum over index tuples and j of
/// phi_j(alpha_n) * prod_m Q_j^{(f_m)}(alpha_n) * share_{f,j} + randomness share.
///
/// Reads only the queries addressed to this server and the server's own state.
pub fn compute_answer(
    st: &ServerState,
    queries: &[&RoundQuery],
    inter: &IntermediatePolys,
    p: &SystemParams,
    d: &DerivedParams,
    pts: &PublicPoints,
    s: usize,
) -> Result<RoundAnswer> {
    let field = d.field();
    let n = st.server;
    let per_user: Vec<&RoundQuery> = (0..p.users())
        .map(|m| {
            queries
                .iter()
                .copied()
                .find(|q| q.user == m && q.server == n && q.round == s)
                .ok_or(Error::MissingQuery {
                    user: m,
                    server: n,
                    round: s,
                })
        })
        .collect::<Result<_>>()?;
    let x = pts.alpha[n];
    let phi: Vec<Fe> = inter
        .polys
        .iter()
        .map(|ph| ph.evaluate(&field, x))
        .collect();
    let mut acc = Fe::ZERO;
    for off in 0..p.file_count() {
        let tuple = tuple_of(&p.f, off);
        for (j, &ph) in phi.iter().enumerate() {
            let mut term = field.mul(ph, st.storage.get(off, j));
            for (q, &fm) in per_user.iter().zip(&tuple) {
                term = field.mul(term, q.get(fm, j));
            }
            acc = field.add(acc, term);
        }
    }
    let noise = st.randomness.get(s).copied().unwrap_or(Fe::ZERO);
    Ok(RoundAnswer {
        server: n,
        round: s,
        value: Some(field.add(acc, noise)),
    })
}

/// How a Byzantine server corrupts its reply.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "c")]
pub enum Strategy {
    /// Fresh uniform element, kept even if it happens to equal the honest value.
    UniformRandom,
    AdditiveOffset(u64),
    Constant(u64),
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::UniformRandom => write!(f, "random"),
            Strategy::AdditiveOffset(c) => write!(f, "offset:{c}"),
            Strategy::Constant(c) => write!(f, "const:{c}"),
        }
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let parse_c = |v: &str| {
            v.parse::<u64>()
                .map_err(|e| format!("bad constant {v:?}: {e}"))
        };
        match s.split_once(':') {
            None if s == "random" => Ok(Strategy::UniformRandom),
            Some(("offset", v)) => Ok(Strategy::AdditiveOffset(parse_c(v)?)),
            Some(("const", v)) => Ok(Strategy::Constant(parse_c(v)?)),
            _ => Err(format!(
                "unknown strategy {s:?}; expected random, offset:C or const:C"
            )),
        }
    }
}

/// Which servers misbehave, fixed for a whole execution.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversaryConfig {
    pub byzantine: BTreeSet<usize>,
    pub unresponsive: BTreeSet<usize>,
    pub strategy: Strategy,
}

impl AdversaryConfig {
    pub fn honest() -> Self {
        AdversaryConfig {
            byzantine: BTreeSet::new(),
            unresponsive: BTreeSet::new(),
            strategy: Strategy::UniformRandom,
        }
    }

    /// Indices in range and the two sets disjoint.
    pub fn check_indices(&self, n: usize) -> Result<()> {
        if let Some(bad) = self
            .byzantine
            .iter()
            .chain(&self.unresponsive)
            .find(|&&i| i >= n)
        {
            return Err(Error::AdversaryOutOfBounds(format!(
                "server {} does not exist",
                bad + 1
            )));
        }
        if let Some(both) = self.byzantine.intersection(&self.unresponsive).next() {
            return Err(Error::AdversaryOutOfBounds(format!(
                "server {} is both Byzantine and unresponsive",
                both + 1
            )));
        }
        Ok(())
    }

    /// [`Self::check_indices`] plus |B| <= B and |U| <= U.
    pub fn check_bounds(&self, p: &SystemParams) -> Result<()> {
        self.check_indices(p.n)?;
        if self.byzantine.len() > p.b {
            return Err(Error::AdversaryOutOfBounds(format!(
                "{} Byzantine servers exceed B = {}",
                self.byzantine.len(),
                p.b
            )));
        }
        if self.unresponsive.len() > p.u {
            return Err(Error::AdversaryOutOfBounds(format!(
                "{} unresponsive servers exceed U = {}",
                self.unresponsive.len(),
                p.u
            )));
        }
        Ok(())
    }
}

pub fn apply_adversary<R: Rng + ?Sized>(
    ans: RoundAnswer,
    cfg: &AdversaryConfig,
    field: &Field,
    rng: &mut R,
) -> RoundAnswer {
    if cfg.unresponsive.contains(&ans.server) {
        return RoundAnswer { value: None, ..ans };
    }
    if !cfg.byzantine.contains(&ans.server) {
        return ans;
    }
    let value = ans.value.map(|honest| match cfg.strategy {
        Strategy::UniformRandom => field.random(rng),
        Strategy::AdditiveOffset(c) => field.add(honest, field.elem(c)),
        Strategy::Constant(c) => field.elem(c),
    });
    RoundAnswer { value, ..ans }
}
