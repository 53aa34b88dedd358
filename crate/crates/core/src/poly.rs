//! Dense univariate polynomials over F_q.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Fe, Field};

/// Coefficients lowest degree first, trailing zeros trimmed. The zero
/// polynomial has no coefficients.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Poly {
    coeffs: Vec<Fe>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly { coeffs: Vec::new() }
    }

    pub fn constant(c: Fe) -> Self {
        Self::from_coeffs(vec![c])
    }

    pub fn from_coeffs(mut coeffs: Vec<Fe>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        Poly { coeffs }
    }

    /// Monic `prod (x - r)`.
    pub fn from_roots(field: &Field, roots: &[Fe]) -> Self {
        let mut c = vec![Fe::ONE];
        for &r in roots {
            let neg = field.neg(r);
            c.push(Fe::ZERO);
            for i in (0..c.len()).rev() {
                let lower = if i > 0 { c[i - 1] } else { Fe::ZERO };
                c[i] = field.add(lower, field.mul(c[i], neg));
            }
        }
        Self::from_coeffs(c)
    }

    pub fn coeffs(&self) -> &[Fe] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> Fe {
        self.coeffs.last().copied().unwrap_or(Fe::ZERO)
    }

    /// Horner evaluation.
    pub fn evaluate(&self, field: &Field, x: Fe) -> Fe {
        self.coeffs
            .iter()
            .rev()
            .fold(Fe::ZERO, |acc, &c| field.add(field.mul(acc, x), c))
    }

    pub fn evaluate_many(&self, field: &Field, xs: &[Fe]) -> Vec<Fe> {
        xs.iter().map(|&x| self.evaluate(field, x)).collect()
    }

    pub fn add(&self, field: &Field, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let c = (0..n)
            .map(|i| {
                let a = self.coeffs.get(i).copied().unwrap_or(Fe::ZERO);
                let b = other.coeffs.get(i).copied().unwrap_or(Fe::ZERO);
                field.add(a, b)
            })
            .collect();
        Poly::from_coeffs(c)
    }

    pub fn sub(&self, field: &Field, other: &Poly) -> Poly {
        self.add(field, &other.scale(field, field.neg(Fe::ONE)))
    }

    pub fn scale(&self, field: &Field, s: Fe) -> Poly {
        Poly::from_coeffs(self.coeffs.iter().map(|&c| field.mul(c, s)).collect())
    }

    pub fn mul(&self, field: &Field, other: &Poly) -> Poly {
        if self.is_zero() || other.is_zero() {
            return Poly::zero();
        }
        let mut c = vec![Fe::ZERO; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, &b) in other.coeffs.iter().enumerate() {
                c[i + j] = field.add(c[i + j], field.mul(a, b));
            }
        }
        Poly::from_coeffs(c)
    }

    /// Long division; returns `(quotient, remainder)`.
    pub fn div_rem(&self, field: &Field, divisor: &Poly) -> Result<(Poly, Poly)> {
        let Some(dd) = divisor.degree() else {
            return Err(Error::DivisionByZero);
        };
        let lead_inv = field.inv(divisor.leading())?;
        let mut rem = self.coeffs.clone();
        if rem.len() <= dd {
            return Ok((Poly::zero(), self.clone()));
        }
        let mut quot = vec![Fe::ZERO; rem.len() - dd];
        for i in (0..quot.len()).rev() {
            let coef = field.mul(rem[i + dd], lead_inv);
            quot[i] = coef;
            if coef.is_zero() {
                continue;
            }
            for (j, &d) in divisor.coeffs.iter().enumerate() {
                rem[i + j] = field.sub(rem[i + j], field.mul(coef, d));
            }
        }
        rem.truncate(dd);
        Ok((Poly::from_coeffs(quot), Poly::from_coeffs(rem)))
    }

    /// Unique polynomial of degree `< nodes.len()` through every `(x, y)`.
    pub fn interpolate(field: &Field, nodes: &[(Fe, Fe)]) -> Result<Poly> {
        if nodes.is_empty() {
            return Err(Error::ShapeMismatch(
                "interpolation needs at least one node".into(),
            ));
        }
        let mut seen = HashSet::with_capacity(nodes.len());
        for &(x, _) in nodes {
            if !seen.insert(x) {
                return Err(Error::DuplicateNode(x.value()));
            }
        }
        let xs: Vec<Fe> = nodes.iter().map(|&(x, _)| x).collect();
        let master = Poly::from_roots(field, &xs);
        let mut acc = vec![Fe::ZERO; nodes.len()];
        for &(xi, yi) in nodes {
            if yi.is_zero() {
                continue;
            }
            let basis = master.deflate(field, xi);
            let denom = basis.evaluate(field, xi);
            let s = field
                .div(yi, denom)
                .expect("distinct nodes give nonzero denominator");
            for (a, &b) in acc.iter_mut().zip(basis.coeffs.iter()) {
                *a = field.add(*a, field.mul(s, b));
            }
        }
        Ok(Poly::from_coeffs(acc))
    }

    /// Lagrange basis polynomial for `nodes[idx]`: one there, zero at the others.
    pub fn lagrange_basis(field: &Field, nodes: &[Fe], idx: usize) -> Result<Poly> {
        let pts: Vec<(Fe, Fe)> = nodes
            .iter()
            .enumerate()
            .map(|(i, &x)| (x, if i == idx { Fe::ONE } else { Fe::ZERO }))
            .collect();
        Poly::interpolate(field, &pts)
    }

    /// Exact division by `(x - root)` by synthetic division; the remainder is dropped.
    fn deflate(&self, field: &Field, root: Fe) -> Poly {
        let n = self.coeffs.len();
        if n <= 1 {
            return Poly::zero();
        }
        let mut out = vec![Fe::ZERO; n - 1];
        let mut carry = Fe::ZERO;
        for i in (1..n).rev() {
            carry = field.add(self.coeffs[i], field.mul(carry, root));
            out[i - 1] = carry;
        }
        Poly::from_coeffs(out)
    }
}
