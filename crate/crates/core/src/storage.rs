//! X-secure Lagrange storage and the dealer's per-round correlated randomness.
//!
//! Row `i` of every file is placed at the points `beta_{i,0..K}` of a
//! polynomial of degree `< K + X`, padded with `X` uniform noises at
//! `beta_{i,K..K+X}`. Server `n` stores the evaluation at `alpha_n`.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Fe, Field};
use crate::params::{DerivedParams, PublicPoints, SystemParams};
use crate::poly::Poly;
use crate::seed::Seed;

/// Whether plaintext polynomials are kept next to the shares.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Shares only.
    Protocol,
    /// Shares plus the polynomials they were cut from, for oracle checks.
    Audit,
}

/// All index tuples `(f_1, .., f_M)` in mixed-radix order, last index fastest.
pub fn index_tuples(ranges: &[usize]) -> Vec<Vec<usize>> {
    let total: usize = ranges.iter().product();
    (0..total).map(|off| tuple_of(ranges, off)).collect()
}

/// Position of `tuple` in [`index_tuples`] order.
pub fn file_offset(ranges: &[usize], tuple: &[usize]) -> Option<usize> {
    if tuple.len() != ranges.len() || tuple.iter().zip(ranges).any(|(t, r)| t >= r) {
        return None;
    }
    Some(tuple.iter().zip(ranges).fold(0, |acc, (t, r)| acc * r + t))
}

pub fn tuple_of(ranges: &[usize], mut offset: usize) -> Vec<usize> {
    let mut t = vec![0; ranges.len()];
    for (slot, &r) in t.iter_mut().zip(ranges).rev() {
        *slot = offset % r;
        offset /= r;
    }
    t
}

/// The plaintext database: one lambda x K matrix per index tuple.
#[derive(Debug)]
pub struct Database {
    q: u64,
    ranges: Vec<usize>,
    lambda: usize,
    k: usize,
    files: Vec<Vec<Vec<Fe>>>,
    reads: AtomicU64,
}

impl Clone for Database {
    fn clone(&self) -> Self {
        Database {
            q: self.q,
            ranges: self.ranges.clone(),
            lambda: self.lambda,
            k: self.k,
            files: self.files.clone(),
            reads: AtomicU64::new(0),
        }
    }
}

impl PartialEq for Database {
    fn eq(&self, other: &Self) -> bool {
        self.q == other.q
            && self.ranges == other.ranges
            && self.lambda == other.lambda
            && self.k == other.k
            && self.files == other.files
    }
}

impl Eq for Database {}

impl Database {
    /// `files` must be in [`index_tuples`] order.
    pub fn new(
        q: u64,
        ranges: Vec<usize>,
        lambda: usize,
        k: usize,
        files: Vec<Vec<Vec<Fe>>>,
    ) -> Result<Self> {
        let expected: usize = ranges.iter().product();
        if files.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "expected {expected} files, got {}",
                files.len()
            )));
        }
        for (off, file) in files.iter().enumerate() {
            if file.len() != lambda || file.iter().any(|r| r.len() != k) {
                return Err(Error::ShapeMismatch(format!(
                    "file {:?} is not {lambda}x{k}",
                    tuple_of(&ranges, off)
                )));
            }
            if file.iter().flatten().any(|v| v.value() >= q) {
                return Err(Error::ShapeMismatch(format!(
                    "file {:?} holds a value outside F_{q}",
                    tuple_of(&ranges, off)
                )));
            }
        }
        Ok(Database {
            q,
            ranges,
            lambda,
            k,
            files,
            reads: AtomicU64::new(0),
        })
    }

    /// Uniformly random contents.
    pub fn random(p: &SystemParams, d: &DerivedParams, seed: &Seed) -> Self {
        let field = d.field();
        let mut rng = seed.derive("database").rng();
        let files = (0..p.file_count())
            .map(|_| {
                (0..d.lambda)
                    .map(|_| field.random_vec(&mut rng, p.k))
                    .collect()
            })
            .collect();
        Database::new(d.q, p.f.clone(), d.lambda, p.k, files).expect("generated shape is valid")
    }

    /// Checks that the database matches the parameter set.
    pub fn check_shape(&self, p: &SystemParams, d: &DerivedParams) -> Result<()> {
        if self.q != d.q || self.ranges != p.f || self.lambda != d.lambda || self.k != p.k {
            return Err(Error::ShapeMismatch(format!(
                "database (q={}, F={:?}, lambda={}, K={}) does not match parameters \
                 (q={}, F={:?}, lambda={}, K={})",
                self.q, self.ranges, self.lambda, self.k, d.q, p.f, d.lambda, p.k
            )));
        }
        Ok(())
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn ranges(&self) -> &[usize] {
        &self.ranges
    }

    pub fn lambda(&self) -> usize {
        self.lambda
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }

    /// Reads one file by offset. Every read bumps the access counter.
    pub fn file(&self, offset: usize) -> &[Vec<Fe>] {
        self.reads.fetch_add(1, Ordering::Relaxed);
        &self.files[offset]
    }

    pub fn file_by_tuple(&self, tuple: &[usize]) -> Option<&[Vec<Fe>]> {
        file_offset(&self.ranges, tuple).map(|o| self.file(o))
    }

    pub fn set_file(&mut self, offset: usize, file: Vec<Vec<Fe>>) -> Result<()> {
        if file.len() != self.lambda || file.iter().any(|r| r.len() != self.k) {
            return Err(Error::ShapeMismatch(
                "replacement file has wrong shape".into(),
            ));
        }
        self.files[offset] = file;
        Ok(())
    }

    /// Number of plaintext reads so far.
    pub fn reads(&self) -> u64 {
        self.reads.load(Ordering::Relaxed)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&DatabaseJson::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: DatabaseJson = serde_json::from_str(text)?;
        raw.try_into()
    }
}

/// Wire form: 1-based comma-joined index tuples as keys.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatabaseJson {
    q: u64,
    #[serde(rename = "M")]
    m: usize,
    #[serde(rename = "F")]
    f: Vec<usize>,
    lambda: usize,
    #[serde(rename = "K")]
    k: usize,
    files: BTreeMap<String, Vec<Vec<u64>>>,
}

impl From<&Database> for DatabaseJson {
    fn from(db: &Database) -> Self {
        let files = db
            .files
            .iter()
            .enumerate()
            .map(|(off, file)| {
                let key = tuple_of(&db.ranges, off)
                    .iter()
                    .map(|t| (t + 1).to_string())
                    .collect::<Vec<_>>()
                    .join(",");
                let rows = file
                    .iter()
                    .map(|r| r.iter().map(|v| v.value()).collect())
                    .collect();
                (key, rows)
            })
            .collect();
        DatabaseJson {
            q: db.q,
            m: db.ranges.len(),
            f: db.ranges.clone(),
            lambda: db.lambda,
            k: db.k,
            files,
        }
    }
}

impl TryFrom<DatabaseJson> for Database {
    type Error = Error;

    fn try_from(raw: DatabaseJson) -> Result<Self> {
        let field = Field::new(raw.q)?;
        if raw.f.len() != raw.m {
            return Err(Error::ShapeMismatch(format!(
                "M = {} but F has {} entries",
                raw.m,
                raw.f.len()
            )));
        }
        let mut files = vec![None; raw.f.iter().product()];
        for (key, rows) in raw.files {
            let tuple: Vec<usize> = key
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<usize>()
                        .ok()
                        .and_then(|v| v.checked_sub(1))
                })
                .collect::<Option<_>>()
                .ok_or_else(|| Error::ShapeMismatch(format!("bad file key {key:?}")))?;
            let off = file_offset(&raw.f, &tuple)
                .ok_or_else(|| Error::ShapeMismatch(format!("file key {key:?} out of range")))?;
            let rows: Vec<Vec<Fe>> = rows
                .iter()
                .map(|r| {
                    r.iter()
                        .map(|&v| field.checked_elem(v))
                        .collect::<Option<Vec<_>>>()
                })
                .collect::<Option<_>>()
                .ok_or_else(|| {
                    Error::ShapeMismatch(format!("file {key:?} holds a value outside F_{}", raw.q))
                })?;
            if files[off].replace(rows).is_some() {
                return Err(Error::ShapeMismatch(format!("duplicate file key {key:?}")));
            }
        }
        let files = files
            .into_iter()
            .enumerate()
            .map(|(off, f)| {
                f.ok_or_else(|| {
                    Error::ShapeMismatch(format!("missing file {:?}", tuple_of(&raw.f, off)))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Database::new(raw.q, raw.f, raw.lambda, raw.k, files)
    }
}

/// What server `n` stores: the evaluation at `alpha_n` of every row polynomial.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StorageShare {
    pub server: usize,
    lambda: usize,
    values: Vec<Fe>,
}

impl StorageShare {
    /// Share of row `row` of the file at offset `file`.
    #[inline]
    pub fn get(&self, file: usize, row: usize) -> Fe {
        self.values[file * self.lambda + row]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Output of the dealer's storage step.
#[derive(Clone, Debug)]
pub struct EncodedStorage {
    pub shares: Vec<StorageShare>,
    /// Row polynomials indexed `file * lambda + row`; present in audit mode only.
    pub polys: Option<Vec<Poly>>,
}

impl EncodedStorage {
    pub fn poly(&self, lambda: usize, file: usize, row: usize) -> Option<&Poly> {
        self.polys.as_ref().map(|p| &p[file * lambda + row])
    }
}

/// Encodes every row of every file into N shares.
pub fn encode_database(
    db: &Database,
    p: &SystemParams,
    d: &DerivedParams,
    pts: &PublicPoints,
    seed: &Seed,
    mode: Mode,
) -> Result<EncodedStorage> {
    db.check_shape(p, d)?;
    let field = d.field();
    let width = p.k + p.x;
    let mut values = vec![Vec::with_capacity(db.len() * d.lambda); p.n];
    let mut polys = Vec::new();
    for off in 0..db.len() {
        let file = db.file(off);
        for (i, row) in file.iter().enumerate() {
            let mut rng = seed.derive(&format!("storage/{off}/{i}")).rng();
            let nodes: Vec<(Fe, Fe)> = (0..width)
                .map(|j| {
                    let y = if j < p.k {
                        row[j]
                    } else {
                        field.random(&mut rng)
                    };
                    (pts.beta(i, j), y)
                })
                .collect();
            let poly = Poly::interpolate(&field, &nodes)?;
            for (n, slot) in values.iter_mut().enumerate() {
                slot.push(poly.evaluate(&field, pts.alpha[n]));
            }
            if mode == Mode::Audit {
                polys.push(poly);
            }
        }
    }
    let shares = values
        .into_iter()
        .enumerate()
        .map(|(server, values)| StorageShare {
            server,
            lambda: d.lambda,
            values,
        })
        .collect();
    Ok(EncodedStorage {
        shares,
        polys: (mode == Mode::Audit).then_some(polys),
    })
}

/// Recovers row `row` of file `file` from at least K + X distinct shares.
pub fn reconstruct_from_shares(
    shares: &[&StorageShare],
    file: usize,
    row: usize,
    p: &SystemParams,
    d: &DerivedParams,
    pts: &PublicPoints,
) -> Result<Vec<Fe>> {
    let field = d.field();
    let servers: BTreeSet<usize> = shares.iter().map(|s| s.server).collect();
    let need = p.k + p.x;
    if servers.len() < need {
        return Err(Error::NotEnoughShares {
            have: servers.len(),
            need,
        });
    }
    let mut seen = BTreeSet::new();
    let nodes: Vec<(Fe, Fe)> = shares
        .iter()
        .filter(|s| seen.insert(s.server))
        .map(|s| (pts.alpha[s.server], s.get(file, row)))
        .collect();
    let poly = Poly::interpolate(&field, &nodes)?;
    Ok((0..p.k)
        .map(|j| poly.evaluate(&field, pts.beta(row, j)))
        .collect())
}

/// The dealer's round-`s` randomness: one share per server.
#[derive(Clone, Debug)]
pub struct RoundRandomness {
    pub round: usize,
    pub shares: Vec<Fe>,
    /// The noise symbols z_1..z_{K+X+sum(T)-1}; audit mode only.
    pub noise: Option<Vec<Fe>>,
    /// The noise polynomial; audit mode only.
    pub poly: Option<Poly>,
}

impl RoundRandomness {
    /// All-zero shares used when server privacy is off.
    pub fn zero(round: usize, n: usize) -> Self {
        RoundRandomness {
            round,
            shares: vec![Fe::ZERO; n],
            noise: None,
            poly: None,
        }
    }
}

/// Samples the round-`s` noise polynomial, which vanishes at every
/// `beta_{i,s}` and takes fresh uniform values at the first
/// K + X + sum(T) - 1 server points.
pub fn generate_round_randomness(
    p: &SystemParams,
    d: &DerivedParams,
    pts: &PublicPoints,
    s: usize,
    seed: &Seed,
    mode: Mode,
) -> Result<RoundRandomness> {
    if !p.server_privacy {
        return Err(Error::ModeOff);
    }
    if s >= d.s {
        return Err(Error::InvalidParams(format!("round {s} out of range")));
    }
    let field = d.field();
    let mut rng = seed.derive(&format!("dealer/round/{s}")).rng();
    let noise = field.random_vec(&mut rng, p.noise_per_round());
    let nodes: Vec<(Fe, Fe)> = pts
        .beta_column(s)
        .into_iter()
        .map(|b| (b, Fe::ZERO))
        .chain(pts.alpha.iter().copied().zip(noise.iter().copied()))
        .collect();
    let poly = Poly::interpolate(&field, &nodes)?;
    let shares = poly.evaluate_many(&field, &pts.alpha);
    let audit = mode == Mode::Audit;
    Ok(RoundRandomness {
        round: s,
        shares,
        noise: audit.then_some(noise),
        poly: audit.then_some(poly),
    })
}
