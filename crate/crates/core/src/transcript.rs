//! Serializable execution records.
//!
//! External numbering is 1-based (users, servers, rounds, indices), field
//! elements are decimal integers and rates are exact `"num/den"` strings.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{DerivedParams, Rate, SystemParams};
use crate::seed::Seed;
use crate::server::{AdversaryConfig, Strategy};

pub(crate) mod rate_str {
    use super::Rate;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rate, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{}/{}", r.numer(), r.denom()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rate, D::Error> {
        let s = String::deserialize(d)?;
        let bad = || serde::de::Error::custom(format!("bad rate {s:?}"));
        let (n, den) = s.split_once('/').ok_or_else(bad)?;
        let n: u64 = n.parse().map_err(|_| bad())?;
        let den: u64 = den.parse().map_err(|_| bad())?;
        if den == 0 {
            return Err(bad());
        }
        Ok(Rate::new(n, den))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversaryRecord {
    pub byzantine: Vec<usize>,
    pub unresponsive: Vec<usize>,
    pub strategy: String,
}

impl From<&AdversaryConfig> for AdversaryRecord {
    fn from(a: &AdversaryConfig) -> Self {
        AdversaryRecord {
            byzantine: a.byzantine.iter().map(|n| n + 1).collect(),
            unresponsive: a.unresponsive.iter().map(|n| n + 1).collect(),
            strategy: a.strategy.to_string(),
        }
    }
}

impl TryFrom<&AdversaryRecord> for AdversaryConfig {
    type Error = Error;

    fn try_from(r: &AdversaryRecord) -> Result<Self> {
        let zero_based = |v: &[usize]| {
            v.iter()
                .map(|&n| n.checked_sub(1))
                .collect::<Option<_>>()
                .ok_or_else(|| Error::AdversaryOutOfBounds("server indices are 1-based".into()))
        };
        Ok(AdversaryConfig {
            byzantine: zero_based(&r.byzantine)?,
            unresponsive: zero_based(&r.unresponsive)?,
            strategy: r
                .strategy
                .parse::<Strategy>()
                .map_err(Error::AdversaryOutOfBounds)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub queries_digest: String,
    /// One entry per server; `null` for a silent server.
    pub answers: Vec<Option<u64>>,
    pub erased: Vec<bool>,
    /// Recovered answer polynomial, lowest degree first.
    pub answer_poly: Vec<u64>,
    pub column: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metrics {
    /// Desired-file symbols.
    #[serde(rename = "L")]
    pub l: u64,
    /// Downloaded symbols (responsive answers over all rounds).
    #[serde(rename = "D")]
    pub d: u64,
    #[serde(rename = "R", with = "rate_str")]
    pub r: Rate,
    pub randomness_symbols: u64,
    #[serde(with = "rate_str")]
    pub rho: Rate,
    #[serde(rename = "R_formula", with = "rate_str")]
    pub r_formula: Rate,
    #[serde(with = "rate_str")]
    pub rho_formula: Rate,
    pub wall_time_us: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub params: SystemParams,
    pub derived: DerivedParams,
    pub points_digest: String,
    pub seed: Seed,
    pub theta: Vec<usize>,
    pub adversary: AdversaryRecord,
    pub rounds: Vec<RoundRecord>,
    pub retrieved_file: Vec<Vec<u64>>,
    pub metrics: Metrics,
}

impl Transcript {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// JSON with the wall-clock field zeroed; identical inputs give identical bytes.
    pub fn canonical_json(&self) -> Result<String> {
        let mut t = self.clone();
        t.metrics.wall_time_us = 0;
        t.to_json()
    }
}
