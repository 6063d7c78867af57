//! Smallest eigenpairs of a sparse symmetric positive semidefinite matrix
//! restricted to the kernel of a few linear constraints.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, gram_schmidt, norm, scale, CsrMatrix, EnvelopeCholesky};
use crate::sphere::random_unit;

pub const DEFAULT_BLOCK: usize = 8;
pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-8;
pub const MAX_ITERATIONS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpair {
    pub value: f64,
    /// Unit Euclidean norm, satisfies the constraints.
    pub vector: Vec<f64>,
    /// `|P (K u - lambda u)|` with `P` the orthogonal projector onto the
    /// constraint kernel.
    pub residual: f64,
    pub iterations: usize,
}

/// Inverse of `P (K + shift I) P` on `{x : C x = 0}`.
struct ConstrainedSolver<'a> {
    chol: EnvelopeCholesky,
    rows: &'a [Vec<f64>],
    z: Vec<Vec<f64>>,
    schur: Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
}

impl<'a> ConstrainedSolver<'a> {
    fn new(k: &CsrMatrix, shift: f64, rows: &'a [Vec<f64>]) -> Result<Self> {
        let chol = EnvelopeCholesky::factor(k, shift)?;
        let z: Vec<Vec<f64>> = rows
            .iter()
            .map(|c| {
                let mut x = c.clone();
                chol.solve_in_place(&mut x);
                x
            })
            .collect();
        let l = rows.len();
        let schur =
            if l == 0 {
                None
            } else {
                let s = DMatrix::from_fn(l, l, |i, j| dot(&rows[i], &z[j]));
                Some(s.cholesky().ok_or_else(|| {
                    Error::Solver("constraint Schur complement is singular".into())
                })?)
            };
        Ok(Self {
            chol,
            rows,
            z,
            schur,
        })
    }

    fn apply(&self, y: &mut [f64]) {
        self.chol.solve_in_place(y);
        if let Some(s) = &self.schur {
            let rhs = nalgebra::DVector::from_iterator(
                self.rows.len(),
                self.rows.iter().map(|c| dot(c, y)),
            );
            let mu = s.solve(&rhs);
            for (zj, m) in self.z.iter().zip(mu.iter()) {
                axpy(-m, zj, y);
            }
        }
        project_out(self.rows, y);
    }
}

/// `x <- x - C^T C x` for orthonormal rows `C`.
fn project_out(rows: &[Vec<f64>], x: &mut [f64]) {
    for c in rows {
        let a = dot(c, x);
        axpy(-a, c, x);
    }
}

/// Smallest eigenpair of `K` on `{x : C x = 0}` by block inverse subspace
/// iteration with Rayleigh-Ritz. `constraints` must be orthonormal rows.
///
/// The start block is drawn from a fixed-seed generator, so results are
/// deterministic.
pub fn constrained_smallest_eigenpair(
    k: &CsrMatrix,
    constraints: &[Vec<f64>],
    block: usize,
    residual_tol: f64,
) -> Result<Eigenpair> {
    let n = k.nrows();
    if k.ncols() != n {
        return Err(Error::InvalidInput(
            "eigenproblem matrix must be square".into(),
        ));
    }
    if constraints.iter().any(|c| c.len() != n) {
        return Err(Error::InvalidInput(
            "constraint rows have the wrong length".into(),
        ));
    }
    if constraints.len() >= n {
        return Err(Error::InvalidInput(
            "constraints leave no free directions".into(),
        ));
    }
    let b = block.clamp(1, n - constraints.len());
    let diag = k.diagonal();
    let mean = diag.iter().sum::<f64>() / n as f64;
    let shift = if mean > 0.0 { 1e-6 * mean } else { 1.0 };
    let solver = ConstrainedSolver::new(k, shift, constraints)?;

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut x: Vec<Vec<f64>> = (0..b)
        .map(|_| {
            let mut v = random_unit(&mut rng, n);
            project_out(constraints, &mut v);
            v
        })
        .collect();

    let mut best: Option<Eigenpair> = None;
    for it in 1..=MAX_ITERATIONS {
        for v in x.iter_mut() {
            solver.apply(v);
        }
        let q = gram_schmidt(&x, dot, 1e-28).basis;
        if q.is_empty() {
            return Err(Error::Solver("subspace iteration collapsed".into()));
        }
        let kq: Vec<Vec<f64>> = q.iter().map(|v| k.mul_vec(v)).collect();
        let m = q.len();
        let h = DMatrix::from_fn(m, m, |i, j| 0.5 * (dot(&q[i], &kq[j]) + dot(&q[j], &kq[i])));
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &c| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[c]));
        let mut next = Vec::with_capacity(m);
        for &col in &order {
            let mut v = vec![0.0; n];
            for (i, qi) in q.iter().enumerate() {
                axpy(eig.eigenvectors[(i, col)], qi, &mut v);
            }
            next.push(v);
        }
        let theta = eig.eigenvalues[order[0]];
        let mut u = next[0].clone();
        let nu = norm(&u);
        scale(1.0 / nu, &mut u);
        let mut r = k.mul_vec(&u);
        axpy(-theta, &u, &mut r);
        project_out(constraints, &mut r);
        let residual = norm(&r);
        let pair = Eigenpair {
            value: theta,
            vector: u,
            residual,
            iterations: it,
        };
        if residual <= residual_tol {
            return Ok(pair);
        }
        if best.as_ref().is_none_or(|p| residual < p.residual) {
            best = Some(pair);
        }
        x = next;
    }
    let best = best.expect("at least one iteration");
    Err(Error::Solver(alloc::format!(
        "eigensolver stopped at residual {:e} after {} iterations",
        best.residual,
        MAX_ITERATIONS
    )))
}
