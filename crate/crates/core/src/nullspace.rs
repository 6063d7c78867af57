//! Polynomial nullspaces of first-order operators.
//!
//! `A` lowers the degree of a homogeneous polynomial by exactly one, so the
//! kernel restricted to `P_m` splits into homogeneous pieces. Each piece is
//! the nullspace of a small matrix acting on coefficients of `x^alpha / alpha!`
//! (in that basis every derivative has unit coefficients).

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::DMatrix;

use crate::ellipticity::{EllipticityCertificate, EllipticityVerdict, Field, FieldVector};
use crate::error::{Error, Result};
use crate::linalg::{canonical_rows, dot, gram_schmidt, nullspace};
use crate::operator::Operator;
use crate::polynomial::{apply_operator_to_polynomial, MultiIndex, PolynomialVectorField};

/// Relative singular-value cutoff for rank decisions.
pub const RANK_CUTOFF: f64 = 1e-10;
pub const DEFAULT_DEGREE_CAP: usize = 8;

/// All exponent vectors of total degree `m` in `d` variables, in
/// lexicographically decreasing order.
pub fn homogeneous_indices(d: usize, m: u32) -> Vec<MultiIndex> {
    fn rec(d: usize, remaining: u32, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
        if prefix.len() + 1 == d {
            prefix.push(remaining);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for e in (0..=remaining).rev() {
            prefix.push(e);
            rec(d, remaining - e, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if d == 0 {
        return out;
    }
    rec(d, m, &mut Vec::with_capacity(d), &mut out);
    out
}

fn factorial(alpha: &[u32]) -> f64 {
    alpha
        .iter()
        .map(|&a| (1..=a).map(f64::from).product::<f64>())
        .product()
}

/// A basis of the polynomial kernel of an operator up to a degree cap.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelBasis {
    pub elements: Vec<PolynomialVectorField>,
    pub dim_space: usize,
    pub dim_values: usize,
    pub degree_cap: usize,
    /// `dims_by_degree[m] = dim(N(A) ∩ P_m)`.
    pub dims_by_degree: Vec<usize>,
    /// Dimension unchanged over the last three degrees up to the cap.
    pub stabilized: bool,
    /// Smallest `l` with `dim(N(A) ∩ P_l)` equal to the final dimension,
    /// reported only when stabilized.
    pub stable_degree: Option<usize>,
    pub warning: Option<String>,
}

impl KernelBasis {
    pub fn dimension(&self) -> usize {
        self.elements.len()
    }
}

/// Homogeneous kernel of degree `m`, returned as coefficient vectors over
/// `homogeneous_indices(d, m) x components` in the monomial basis `x^alpha`.
fn homogeneous_kernel(op: &Operator, m: u32) -> (Vec<MultiIndex>, Vec<Vec<f64>>) {
    let (d, n, k) = (op.dim_space(), op.dim_from(), op.dim_to());
    let cols = homogeneous_indices(d, m);
    if m == 0 {
        let basis = (0..n)
            .map(|c| {
                let mut v = vec![0.0; n];
                v[c] = 1.0;
                v
            })
            .collect();
        return (cols, basis);
    }
    let rows = homogeneous_indices(d, m - 1);
    let row_index: BTreeMap<&MultiIndex, usize> =
        rows.iter().enumerate().map(|(i, a)| (a, i)).collect();
    let mut mat = DMatrix::zeros(rows.len() * k, cols.len() * n);
    for (ai, alpha) in cols.iter().enumerate() {
        for j in 0..d {
            if alpha[j] == 0 {
                continue;
            }
            let mut beta = alpha.clone();
            beta[j] -= 1;
            let bi = row_index[&beta];
            let a = op.matrix(j);
            for r in 0..k {
                for c in 0..n {
                    mat[(bi * k + r, ai * n + c)] += a[(r, c)];
                }
            }
        }
    }
    let scaled_basis = nullspace(&mat, RANK_CUTOFF);
    let basis: Vec<Vec<f64>> = scaled_basis
        .into_iter()
        .map(|mut v| {
            for (ai, alpha) in cols.iter().enumerate() {
                let f = factorial(alpha);
                for c in 0..n {
                    v[ai * n + c] /= f;
                }
            }
            v
        })
        .collect();
    (cols, basis)
}

/// Computes `N(A) ∩ P_m` for `m = 0..=degree_cap` and returns the basis at
/// the cap, orthonormal in the monomial coefficient inner product.
///
/// Within each homogeneous degree the basis is canonicalized (reduced row
/// echelon form, then Gram-Schmidt), so it does not depend on the SVD.
pub fn kernel_basis(op: &Operator, degree_cap: usize) -> KernelBasis {
    let (d, n) = (op.dim_space(), op.dim_from());
    let mut elements = Vec::new();
    let mut dims_by_degree = Vec::with_capacity(degree_cap + 1);
    for m in 0..=degree_cap {
        let (indices, raw) = homogeneous_kernel(op, m as u32);
        if !raw.is_empty() {
            let max = raw
                .iter()
                .flat_map(|v| v.iter())
                .fold(0.0f64, |a, b| a.max(b.abs()));
            let rref = canonical_rows(&raw, 1e-9 * max);
            let ortho = gram_schmidt(&rref, dot, 1e-24);
            for v in ortho.basis {
                let terms = indices.iter().enumerate().flat_map(|(ai, alpha)| {
                    let v = &v;
                    (0..n).map(move |c| (alpha.clone(), c, v[ai * n + c]))
                });
                elements.push(
                    PolynomialVectorField::from_terms(d, n, terms).expect("consistent dimensions"),
                );
            }
        }
        dims_by_degree.push(elements.len());
    }
    let final_dim = elements.len();
    let stabilized = degree_cap >= 2
        && dims_by_degree[degree_cap] == dims_by_degree[degree_cap - 1]
        && dims_by_degree[degree_cap - 1] == dims_by_degree[degree_cap - 2];
    let stable_degree = if stabilized {
        dims_by_degree.iter().position(|&x| x == final_dim)
    } else {
        None
    };
    let warning = if stabilized {
        None
    } else if degree_cap < 2 {
        Some(alloc::format!(
            "degree cap {} is too small to confirm stabilization",
            degree_cap
        ))
    } else {
        Some(alloc::format!(
            "kernel dimension still growing at degree {} ({} -> {}); operator {} is likely not C-elliptic",
            degree_cap,
            dims_by_degree[degree_cap - 1],
            final_dim,
            op.label()
        ))
    };
    KernelBasis {
        elements,
        dim_space: d,
        dim_values: n,
        degree_cap,
        dims_by_degree,
        stabilized,
        stable_degree,
        warning,
    }
}

/// The pair `(Gamma, f)` built from a real ellipticity failure `A[xi] v = 0`:
/// `Gamma = {x : <xi, x> = 0}` and `f(x) = <xi, x> v`, a nonzero kernel
/// element vanishing on `Gamma`.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperplaneCounterexample {
    pub normal: Vec<f64>,
    pub offset: f64,
    pub direction: Vec<f64>,
    pub field: PolynomialVectorField,
    /// Largest coefficient of `A f`.
    pub residual: f64,
}

pub fn hyperplane_counterexample(
    op: &Operator,
    cert: &EllipticityCertificate,
) -> Result<HyperplaneCounterexample> {
    if cert.field != Field::Real || cert.verdict != EllipticityVerdict::NotElliptic {
        return Err(Error::Precondition(
            "a hyperplane counterexample needs a real not-elliptic certificate".into(),
        ));
    }
    let Some(w) = &cert.witness else {
        return Err(Error::Precondition("certificate carries no witness".into()));
    };
    let (FieldVector::Real(xi), FieldVector::Real(v)) = (&w.xi, &w.v) else {
        return Err(Error::Precondition("witness is not real".into()));
    };
    crate::error::check_len("witness direction", op.dim_space(), xi.len())?;
    crate::error::check_len("witness vector", op.dim_from(), v.len())?;
    let d = op.dim_space();
    let terms = (0..d).flat_map(|j| {
        let mut alpha = vec![0u32; d];
        alpha[j] = 1;
        v.iter()
            .enumerate()
            .map(move |(c, &vc)| (alpha.clone(), c, xi[j] * vc))
            .collect::<Vec<_>>()
    });
    let field = PolynomialVectorField::from_terms(d, op.dim_from(), terms)?;
    let residual = apply_operator_to_polynomial(op, &field)?.max_abs_coefficient();
    if field.is_zero() {
        return Err(Error::Precondition("witness produced a zero field".into()));
    }
    if residual > RANK_CUTOFF {
        return Err(Error::Precondition(alloc::format!(
            "witness residual {:e} exceeds {:e}",
            residual,
            RANK_CUTOFF
        )));
    }
    Ok(HyperplaneCounterexample {
        normal: xi.clone(),
        offset: 0.0,
        direction: v.clone(),
        field,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ellipticity::{check_ellipticity, SearchParams};
    use crate::operator::{gradient, partial_x_only, symmetric_gradient};

    #[test]
    fn homogeneous_index_counts() {
        assert_eq!(homogeneous_indices(2, 1), vec![vec![1, 0], vec![0, 1]]);
        assert_eq!(homogeneous_indices(3, 2).len(), 6);
        assert_eq!(homogeneous_indices(1, 4), vec![vec![4]]);
    }

    #[test]
    fn gradient_kernel_is_constants() {
        for n in 1..=3 {
            let kb = kernel_basis(&gradient(2, n), 4);
            assert_eq!(kb.dimension(), n);
            assert!(kb.stabilized);
            assert_eq!(kb.stable_degree, Some(0));
        }
    }

    #[test]
    fn symmetric_gradient_kernel_dimensions() {
        let kb = kernel_basis(&symmetric_gradient(2), DEFAULT_DEGREE_CAP);
        assert_eq!(kb.dimension(), 3);
        assert_eq!(kb.stable_degree, Some(1));
        let kb3 = kernel_basis(&symmetric_gradient(3), 3);
        assert_eq!(kb3.dimension(), 6);
        assert!(kb3.stabilized);
    }

    #[test]
    fn dx_only_does_not_stabilize() {
        let kb = kernel_basis(&partial_x_only(), 4);
        assert!(!kb.stabilized);
        assert!(kb.warning.is_some());
        assert_eq!(kb.dims_by_degree, vec![2, 4, 6, 8, 10]);
    }

    #[test]
    fn counterexample_for_dx_only() {
        let op = partial_x_only();
        let cert = check_ellipticity(&op, Field::Real, 1e-8, SearchParams::default()).unwrap();
        let ce = hyperplane_counterexample(&op, &cert).unwrap();
        assert_eq!(ce.normal, vec![0.0, 1.0]);
        assert!(
            apply_operator_to_polynomial(&op, &ce.field)
                .unwrap()
                .max_abs_coefficient()
                <= 1e-10
        );
        assert!(!ce.field.is_zero());
    }

    #[test]
    fn counterexample_rejects_elliptic_certificate() {
        let op = gradient(2, 1);
        let cert = check_ellipticity(&op, Field::Real, 1e-8, SearchParams::default()).unwrap();
        assert!(matches!(
            hyperplane_counterexample(&op, &cert),
            Err(Error::Precondition(_))
        ));
    }
}
