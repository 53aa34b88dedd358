//! Reed-Solomon codes over arbitrary evaluation points with combined
//! error-and-erasure decoding.
//!
//! Erasures are punctured away; the surviving `n'` symbols are then decoded
//! with Berlekamp-Welch, which corrects up to `(n' - k) / 2` errors.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::field::{Fe, Field};
use crate::linalg::Matrix;
use crate::poly::Poly;

/// A received codeword. `None` marks an erased (missing) symbol.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReceivedWord {
    pub symbols: Vec<Option<Fe>>,
    pub points: Vec<Fe>,
}

impl ReceivedWord {
    pub fn new(symbols: Vec<Option<Fe>>, points: Vec<Fe>) -> Result<Self> {
        if symbols.len() != points.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} symbols for {} points",
                symbols.len(),
                points.len()
            )));
        }
        Ok(ReceivedWord { symbols, points })
    }

    pub fn complete(symbols: Vec<Fe>, points: Vec<Fe>) -> Result<Self> {
        Self::new(symbols.into_iter().map(Some).collect(), points)
    }

    pub fn erasures(&self) -> usize {
        self.symbols.iter().filter(|s| s.is_none()).count()
    }

    fn present(&self) -> Vec<(Fe, Fe)> {
        self.points
            .iter()
            .zip(&self.symbols)
            .filter_map(|(&x, s)| s.map(|y| (x, y)))
            .collect()
    }
}

/// Evaluates `message` at every point.
pub fn rs_encode(field: &Field, message: &Poly, points: &[Fe]) -> Result<Vec<Fe>> {
    if let Some(deg) = message.degree() {
        if deg >= points.len() {
            return Err(Error::DegreeTooHigh {
                degree: deg,
                points: points.len(),
            });
        }
    }
    let mut seen = HashSet::with_capacity(points.len());
    if let Some(dup) = points.iter().find(|&&x| !seen.insert(x)) {
        return Err(Error::DuplicateNode(dup.value()));
    }
    Ok(message.evaluate_many(field, points))
}

/// Maximum number of errors correctable alongside the word's erasures.
pub fn correctable_errors(word: &ReceivedWord, k: usize) -> usize {
    (word.symbols.len() - word.erasures()).saturating_sub(k) / 2
}

/// Recovers the unique message of degree `< k` within half the punctured
/// distance of `word`.
pub fn rs_decode(field: &Field, word: &ReceivedWord, k: usize) -> Result<Poly> {
    if k == 0 {
        return Err(Error::ShapeMismatch(
            "code dimension must be positive".into(),
        ));
    }
    let present = word.present();
    let n = present.len();
    if n < k {
        return Err(Error::DecodeFailure(format!(
            "{n} symbols survive erasure, dimension is {k}"
        )));
    }
    let e_max = (n - k) / 2;
    for e in (0..=e_max).rev() {
        let Some(candidate) = berlekamp_welch(field, &present, k, e) else {
            continue;
        };
        let mismatches = present
            .iter()
            .filter(|&&(x, y)| candidate.evaluate(field, x) != y)
            .count();
        if mismatches <= e_max {
            return Ok(candidate);
        }
    }
    Err(Error::DecodeFailure(format!(
        "more than {e_max} errors among {n} symbols"
    )))
}

/// Solves Q(x_i) = r_i E(x_i) with E monic of degree `e` and deg Q < k + e,
/// then returns Q / E when the division is exact.
fn berlekamp_welch(field: &Field, present: &[(Fe, Fe)], k: usize, e: usize) -> Option<Poly> {
    let q_len = k + e;
    let unknowns = q_len + e;
    let mut rhs = Vec::with_capacity(present.len());
    let sys = Matrix::from_fn(present.len(), unknowns, |row, col| {
        let (x, r) = present[row];
        if col < q_len {
            field.pow(x, col as u64)
        } else {
            field.neg(field.mul(r, field.pow(x, (col - q_len) as u64)))
        }
    });
    for &(x, r) in present {
        rhs.push(field.mul(r, field.pow(x, e as u64)));
    }
    let sol = sys.solve(&rhs, field)?;
    let q = Poly::from_coeffs(sol[..q_len].to_vec());
    let mut e_coeffs = sol[q_len..].to_vec();
    e_coeffs.push(Fe::ONE);
    let locator = Poly::from_coeffs(e_coeffs);
    let (msg, rem) = q.div_rem(field, &locator).ok()?;
    if !rem.is_zero() || msg.degree().is_some_and(|d| d >= k) {
        return None;
    }
    Some(msg)
}
