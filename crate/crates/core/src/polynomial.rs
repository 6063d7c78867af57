//! Sparse `R^N`-valued polynomials in `d` variables.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};
use crate::operator::Operator;

/// Exponent vector of a monomial `x^alpha`.
pub type MultiIndex = Vec<u32>;

/// `x^alpha` by repeated squaring.
pub(crate) fn monomial(x: &[f64], alpha: &[u32]) -> f64 {
    let mut out = 1.0;
    for (&xi, &a) in x.iter().zip(alpha) {
        let (mut base, mut e, mut acc) = (xi, a, 1.0);
        while e > 0 {
            if e & 1 == 1 {
                acc *= base;
            }
            base *= base;
            e >>= 1;
        }
        out *= acc;
    }
    out
}

/// An `R^N`-valued polynomial on `R^d`, stored as a map from
/// `(alpha, component)` to the coefficient of `x^alpha e_component`.
/// Only nonzero coefficients are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialVectorField {
    dim_space: usize,
    dim_values: usize,
    terms: BTreeMap<(MultiIndex, usize), f64>,
}

impl PolynomialVectorField {
    pub fn zero(dim_space: usize, dim_values: usize) -> Self {
        Self {
            dim_space,
            dim_values,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(dim_space: usize, value: &[f64]) -> Self {
        let mut p = Self::zero(dim_space, value.len());
        for (c, &v) in value.iter().enumerate() {
            p.add_term(vec![0; dim_space], c, v);
        }
        p
    }

    /// Sums the given terms; repeated `(alpha, component)` keys accumulate.
    pub fn from_terms<I>(dim_space: usize, dim_values: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (MultiIndex, usize, f64)>,
    {
        let mut p = Self::zero(dim_space, dim_values);
        for (alpha, c, v) in terms {
            check_len("multi-index", dim_space, alpha.len())?;
            if c >= dim_values {
                return Err(Error::InvalidInput(alloc::format!(
                    "component {} out of range for {} values",
                    c,
                    dim_values
                )));
            }
            if !v.is_finite() {
                return Err(Error::InvalidInput(
                    "polynomial coefficients must be finite".into(),
                ));
            }
            p.add_term(alpha, c, v);
        }
        Ok(p)
    }

    fn add_term(&mut self, alpha: MultiIndex, component: usize, value: f64) {
        if value == 0.0 {
            return;
        }
        let key = (alpha, component);
        let entry = self.terms.entry(key.clone()).or_insert(0.0);
        *entry += value;
        if *entry == 0.0 {
            self.terms.remove(&key);
        }
    }

    pub fn dim_space(&self) -> usize {
        self.dim_space
    }

    pub fn dim_values(&self) -> usize {
        self.dim_values
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, usize, f64)> + '_ {
        self.terms.iter().map(|((a, c), v)| (a, *c, *v))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, alpha: &[u32], component: usize) -> f64 {
        self.terms
            .get(&(alpha.to_vec(), component))
            .cloned()
            .unwrap_or(0.0)
    }

    /// Largest total degree among stored terms (0 for the zero polynomial).
    pub fn degree(&self) -> usize {
        self.terms
            .keys()
            .map(|(a, _)| a.iter().map(|&e| e as usize).sum())
            .max()
            .unwrap_or(0)
    }

    pub fn coefficient_norm(&self) -> f64 {
        libm::sqrt(self.terms.values().map(|v| v * v).sum())
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.terms.values().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Drops coefficients with magnitude at most `tol`.
    pub fn pruned(&self, tol: f64) -> Self {
        Self {
            dim_space: self.dim_space,
            dim_values: self.dim_values,
            terms: self
                .terms
                .iter()
                .filter(|(_, v)| v.abs() > tol)
                .map(|(k, v)| (k.clone(), *v))
                .collect(),
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("evaluation point", self.dim_space, x.len())?;
        let mut out = vec![0.0; self.dim_values];
        self.evaluate_into(x, &mut out);
        Ok(out)
    }

    pub(crate) fn evaluate_into(&self, x: &[f64], out: &mut [f64]) {
        for o in out.iter_mut() {
            *o = 0.0;
        }
        for ((alpha, c), v) in &self.terms {
            out[*c] += v * monomial(x, alpha);
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut p = Self::zero(self.dim_space, self.dim_values);
        for ((a, c), v) in &self.terms {
            p.add_term(a.clone(), *c, v * factor);
        }
        p
    }

    /// `self + factor * other`.
    pub fn add_scaled(&self, other: &Self, factor: f64) -> Result<Self> {
        check_len(
            "polynomial space dimension",
            self.dim_space,
            other.dim_space,
        )?;
        check_len(
            "polynomial value dimension",
            self.dim_values,
            other.dim_values,
        )?;
        let mut p = self.clone();
        for ((a, c), v) in &other.terms {
            p.add_term(a.clone(), *c, v * factor);
        }
        Ok(p)
    }

    /// Partial derivative in direction `j`.
    pub fn derivative(&self, j: usize) -> Self {
        let mut p = Self::zero(self.dim_space, self.dim_values);
        for ((alpha, c), v) in &self.terms {
            if alpha[j] > 0 {
                let mut beta = alpha.clone();
                beta[j] -= 1;
                p.add_term(beta, *c, v * alpha[j] as f64);
            }
        }
        p
    }
}

/// `A p = sum_j A_j d_j p`, computed exactly on coefficients. The result is
/// `R^k`-valued.
pub fn apply_operator_to_polynomial(
    op: &Operator,
    p: &PolynomialVectorField,
) -> Result<PolynomialVectorField> {
    check_len("polynomial space dimension", op.dim_space(), p.dim_space())?;
    check_len("polynomial value dimension", op.dim_from(), p.dim_values())?;
    let mut acc: BTreeMap<(MultiIndex, usize), f64> = BTreeMap::new();
    for ((alpha, c), v) in &p.terms {
        for (j, m) in op.matrices().iter().enumerate() {
            if alpha[j] == 0 {
                continue;
            }
            let mut beta = alpha.clone();
            beta[j] -= 1;
            let scale = v * alpha[j] as f64;
            for r in 0..op.dim_to() {
                let a = m[(r, *c)];
                if a != 0.0 {
                    *acc.entry((beta.clone(), r)).or_insert(0.0) += a * scale;
                }
            }
        }
    }
    acc.retain(|_, v| *v != 0.0);
    Ok(PolynomialVectorField {
        dim_space: p.dim_space,
        dim_values: op.dim_to(),
        terms: acc,
    })
}
