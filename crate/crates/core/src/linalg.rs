//! Dense and sparse linear algebra helpers shared by the solvers.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub(crate) fn scale(alpha: f64, x: &mut [f64]) {
    for xi in x.iter_mut() {
        *xi *= alpha;
    }
}

/// Orthonormal basis of the right nullspace of `m`.
///
/// A singular value counts as zero when it is at most `rel_cutoff` times the
/// largest one (or exactly zero for a zero matrix). Rows are zero-padded so
/// that the full right singular basis is available for wide matrices.
pub fn nullspace(m: &DMatrix<f64>, rel_cutoff: f64) -> Vec<Vec<f64>> {
    let cols = m.ncols();
    if cols == 0 {
        return Vec::new();
    }
    let padded = pad_rows(m);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let threshold = rel_cutoff * sigma_max;
    let mut out = Vec::new();
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s <= threshold {
            out.push(v_t.row(i).iter().cloned().collect());
        }
    }
    out
}

fn pad_rows(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.nrows() >= m.ncols() {
        return m.clone();
    }
    let mut padded = DMatrix::zeros(m.ncols(), m.ncols());
    padded.view_mut((0, 0), (m.nrows(), m.ncols())).copy_from(m);
    padded
}

/// Orthonormal basis (as matrix columns) of the column space of `m`,
/// keeping singular values strictly above `abs_cutoff`.
pub fn column_space(m: &DMatrix<f64>, abs_cutoff: f64) -> DMatrix<f64> {
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let keep: Vec<usize> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s > abs_cutoff)
        .map(|(i, _)| i)
        .collect();
    let mut q = DMatrix::zeros(m.nrows(), keep.len());
    for (c, &i) in keep.iter().enumerate() {
        q.set_column(c, &u.column(i));
    }
    q
}

/// Intersection of the column spans of two matrices with orthonormal columns.
///
/// Vectors `x = q1 a = q2 b` are read off the nullspace of `[q1, -q2]`,
/// where singular values at or below `tol` count as zero.
pub fn intersect_subspaces(q1: &DMatrix<f64>, q2: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let rows = q1.nrows();
    let (r1, r2) = (q1.ncols(), q2.ncols());
    if r1 == 0 || r2 == 0 {
        return DMatrix::zeros(rows, 0);
    }
    let mut stacked = DMatrix::zeros(rows, r1 + r2);
    stacked.view_mut((0, 0), (rows, r1)).copy_from(q1);
    stacked.view_mut((0, r1), (rows, r2)).copy_from(&(-q2));
    let padded = pad_rows(&stacked);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut vectors = Vec::new();
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s <= tol {
            let a = v_t.row(i).columns(0, r1).transpose();
            let x = q1 * a;
            vectors.push(x.iter().cloned().collect::<Vec<f64>>());
        }
    }
    let gs = gram_schmidt(&vectors, dot, 1e-20);
    let mut q = DMatrix::zeros(rows, gs.basis.len());
    for (c, b) in gs.basis.iter().enumerate() {
        for (r, v) in b.iter().enumerate() {
            q[(r, c)] = *v;
        }
    }
    q
}

/// Reduced row echelon form of a set of row vectors spanning a subspace.
///
/// The result depends only on the subspace, which makes it a canonical
/// starting point before orthonormalization.
pub fn canonical_rows(rows: &[Vec<f64>], pivot_tol: f64) -> Vec<Vec<f64>> {
    let mut m: Vec<Vec<f64>> = rows.to_vec();
    let n_rows = m.len();
    if n_rows == 0 {
        return m;
    }
    let n_cols = m[0].len();
    let mut pivot_row = 0;
    for col in 0..n_cols {
        if pivot_row == n_rows {
            break;
        }
        let (best, best_abs) =
            (pivot_row..n_rows)
                .map(|r| (r, m[r][col].abs()))
                .fold(
                    (pivot_row, -1.0),
                    |acc, x| if x.1 > acc.1 { x } else { acc },
                );
        if best_abs <= pivot_tol {
            continue;
        }
        m.swap(pivot_row, best);
        let p = m[pivot_row][col];
        for v in m[pivot_row].iter_mut() {
            *v /= p;
        }
        m[pivot_row][col] = 1.0;
        for r in 0..n_rows {
            if r != pivot_row {
                let f = m[r][col];
                if f != 0.0 {
                    let pr = m[pivot_row].clone();
                    axpy(-f, &pr, &mut m[r]);
                    m[r][col] = 0.0;
                }
            }
        }
        pivot_row += 1;
    }
    m.truncate(pivot_row);
    m
}

pub struct GramSchmidt {
    /// Orthonormal vectors in input order (dependent inputs dropped).
    pub basis: Vec<Vec<f64>>,
    /// `basis[j] = sum_i coefficients[j][i] * inputs[i]`.
    pub coefficients: Vec<Vec<f64>>,
    /// Indices of the inputs that contributed a basis vector.
    pub kept: Vec<usize>,
}

/// Modified Gram-Schmidt with one reorthogonalization pass.
///
/// An input is dropped when its squared residual norm falls to
/// `rel_cutoff` times the largest squared input norm.
pub fn gram_schmidt<F>(inputs: &[Vec<f64>], inner: F, rel_cutoff: f64) -> GramSchmidt
where
    F: Fn(&[f64], &[f64]) -> f64,
{
    let m = inputs.len();
    let max_sq = inputs.iter().map(|v| inner(v, v)).fold(0.0, f64::max);
    let mut out = GramSchmidt {
        basis: Vec::new(),
        coefficients: Vec::new(),
        kept: Vec::new(),
    };
    if max_sq == 0.0 {
        return out;
    }
    for (i, input) in inputs.iter().enumerate() {
        let mut v = input.clone();
        let mut c = vec![0.0; m];
        c[i] = 1.0;
        for _pass in 0..2 {
            for (q, qc) in out.basis.iter().zip(&out.coefficients) {
                let r = inner(&v, q);
                axpy(-r, q, &mut v);
                axpy(-r, qc, &mut c);
            }
        }
        let sq = inner(&v, &v);
        if sq <= rel_cutoff * max_sq || sq <= 0.0 {
            continue;
        }
        let inv = 1.0 / libm::sqrt(sq);
        scale(inv, &mut v);
        scale(inv, &mut c);
        out.basis.push(v);
        out.coefficients.push(c);
        out.kept.push(i);
    }
    out
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Self {
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            debug_assert!(r < nrows && c < ncols);
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .iter()
            .cloned()
            .zip(self.values[span].iter().cloned())
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    pub fn transpose(&self) -> Self {
        let mut triplets = Vec::with_capacity(self.nnz());
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                triplets.push((c, r, v));
            }
        }
        Self::from_triplets(self.ncols, self.nrows, triplets)
    }

    pub fn mul(&self, other: &CsrMatrix) -> Self {
        assert_eq!(self.ncols, other.nrows);
        let mut acc = vec![0.0; other.ncols];
        let mut touched = vec![false; other.ncols];
        let mut cols: Vec<usize> = Vec::new();
        let mut indptr = vec![0usize; self.nrows + 1];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for r in 0..self.nrows {
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    if !touched[c] {
                        touched[c] = true;
                        cols.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            cols.sort_unstable();
            for &c in &cols {
                indices.push(c);
                values.push(acc[c]);
                acc[c] = 0.0;
                touched[c] = false;
            }
            cols.clear();
            indptr[r + 1] = indices.len();
        }
        Self {
            nrows: self.nrows,
            ncols: other.ncols,
            indptr,
            indices,
            values,
        }
    }

    /// `self^T self`.
    pub fn gram(&self) -> Self {
        self.transpose().mul(self)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols))
            .map(|r| self.row(r).find(|(c, _)| *c == r).map_or(0.0, |(_, v)| v))
            .collect()
    }
}

/// Envelope (profile) Cholesky factorization of a symmetric positive
/// definite sparse matrix plus a diagonal shift.
///
/// Row `i` of the factor is stored densely from its first structural
/// nonzero column to the diagonal; fill-in never leaves that envelope.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    first: Vec<usize>,
    offsets: Vec<usize>,
    data: Vec<f64>,
}

impl EnvelopeCholesky {
    pub fn factor(a: &CsrMatrix, shift: f64) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::InvalidInput(
                "envelope Cholesky needs a square matrix".into(),
            ));
        }
        let first: Vec<usize> = (0..n)
            .map(|i| {
                a.row(i)
                    .map(|(c, _)| c)
                    .filter(|&c| c <= i)
                    .min()
                    .unwrap_or(i)
            })
            .collect();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut total = 0usize;
        for (i, f) in first.iter().enumerate() {
            offsets.push(total);
            total += i - f + 1;
        }
        offsets.push(total);
        let mut data = vec![0.0; total];
        for i in 0..n {
            for (c, v) in a.row(i) {
                if c <= i {
                    data[offsets[i] + c - first[i]] += v;
                }
            }
            data[offsets[i] + i - first[i]] += shift;
        }
        for i in 0..n {
            let fi = first[i];
            let oi = offsets[i];
            for j in fi..i {
                let fj = first[j];
                let oj = offsets[j];
                let start = fi.max(fj);
                let s = {
                    let li = &data[oi + start - fi..oi + j - fi];
                    let lj = &data[oj + start - fj..oj + j - fj];
                    dot(li, lj)
                };
                let diag_j = data[oj + j - fj];
                let idx = oi + j - fi;
                data[idx] = (data[idx] - s) / diag_j;
            }
            let row = &data[oi..oi + i - fi];
            let d = data[oi + i - fi] - dot(row, row);
            if !(d > 0.0) {
                return Err(Error::Solver("matrix is not positive definite".into()));
            }
            data[oi + i - fi] = libm::sqrt(d);
        }
        Ok(Self {
            first,
            offsets,
            data,
        })
    }

    pub fn dim(&self) -> usize {
        self.first.len()
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let fi = self.first[i];
            let oi = self.offsets[i];
            let s = dot(&self.data[oi..oi + i - fi], &b[fi..i]);
            b[i] = (b[i] - s) / self.data[oi + i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let oi = self.offsets[i];
            b[i] /= self.data[oi + i - fi];
            let xi = b[i];
            axpy(-xi, &self.data[oi..oi + i - fi], &mut b[fi..i]);
        }
    }
}
