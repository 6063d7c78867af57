//! Constant-coefficient first-order operators `A = sum_j A_j d_j` and their
//! symbol maps.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{check_len, Error, Result};

/// A homogeneous first-order operator from `R^N`-valued to `R^k`-valued
/// functions on `R^d`, stored as its `d` coefficient matrices (each `k x N`).
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    name: Option<String>,
    dim_space: usize,
    dim_from: usize,
    dim_to: usize,
    matrices: Vec<DMatrix<f64>>,
}

impl Operator {
    pub fn new(name: Option<&str>, matrices: Vec<DMatrix<f64>>) -> Result<Self> {
        let Some(first) = matrices.first() else {
            return Err(Error::InvalidInput(
                "operator needs at least one matrix".into(),
            ));
        };
        let (k, n) = first.shape();
        if k == 0 || n == 0 {
            return Err(Error::InvalidInput(
                "operator matrices must be nonempty".into(),
            ));
        }
        for m in &matrices {
            if m.shape() != (k, n) {
                return Err(Error::InvalidInput(
                    "operator matrices differ in shape".into(),
                ));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(
                    "operator entries must be finite".into(),
                ));
            }
        }
        Ok(Self {
            name: name.map(ToString::to_string),
            dim_space: matrices.len(),
            dim_from: n,
            dim_to: k,
            matrices,
        })
    }

    /// Builds an operator from row-major `k x N` blocks, one per direction.
    pub fn from_row_major(
        name: Option<&str>,
        dim_space: usize,
        dim_from: usize,
        dim_to: usize,
        blocks: &[Vec<Vec<f64>>],
    ) -> Result<Self> {
        check_len("operator matrices", dim_space, blocks.len())?;
        let mut matrices = Vec::with_capacity(dim_space);
        for block in blocks {
            check_len("matrix rows", dim_to, block.len())?;
            let mut m = DMatrix::zeros(dim_to, dim_from);
            for (r, row) in block.iter().enumerate() {
                check_len("matrix columns", dim_from, row.len())?;
                for (c, v) in row.iter().enumerate() {
                    m[(r, c)] = *v;
                }
            }
            matrices.push(m);
        }
        Self::new(name, matrices)
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn label(&self) -> &str {
        self.name.as_deref().unwrap_or("unnamed")
    }

    /// `d`
    pub fn dim_space(&self) -> usize {
        self.dim_space
    }

    /// `N`
    pub fn dim_from(&self) -> usize {
        self.dim_from
    }

    /// `k`
    pub fn dim_to(&self) -> usize {
        self.dim_to
    }

    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.matrices
    }

    pub fn matrix(&self, j: usize) -> &DMatrix<f64> {
        &self.matrices[j]
    }

    /// Coefficient matrices of the formal adjoint `A* = sum_j A_j^T d_j`.
    pub fn adjoint_matrices(&self) -> Vec<DMatrix<f64>> {
        self.matrices.iter().map(|m| m.transpose()).collect()
    }

    /// Same operator with every coefficient multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            name: self.name.clone(),
            dim_space: self.dim_space,
            dim_from: self.dim_from,
            dim_to: self.dim_to,
            matrices: self.matrices.iter().map(|m| m * factor).collect(),
        }
    }

    /// The symbol `A[xi] = sum_j xi_j A_j` for real `xi`.
    pub fn symbol(&self, xi: &[f64]) -> Result<DMatrix<f64>> {
        check_len("symbol direction", self.dim_space, xi.len())?;
        let mut out = DMatrix::zeros(self.dim_to, self.dim_from);
        for (m, &x) in self.matrices.iter().zip(xi) {
            if x != 0.0 {
                out += m * x;
            }
        }
        Ok(out)
    }

    /// The symbol for complex `xi`.
    pub fn symbol_complex(&self, xi: &[Complex<f64>]) -> Result<DMatrix<Complex<f64>>> {
        check_len("symbol direction", self.dim_space, xi.len())?;
        let mut out = DMatrix::from_element(self.dim_to, self.dim_from, Complex::new(0.0, 0.0));
        for (m, x) in self.matrices.iter().zip(xi) {
            for (o, a) in out.iter_mut().zip(m.iter()) {
                *o += x * *a;
            }
        }
        Ok(out)
    }

    /// `v (x)_A xi = A[xi] v`.
    pub fn tensor_apply(&self, v: &[f64], xi: &[f64]) -> Result<Vec<f64>> {
        check_len("tensor vector", self.dim_from, v.len())?;
        check_len("tensor direction", self.dim_space, xi.len())?;
        let mut out = alloc::vec![0.0; self.dim_to];
        for (m, &x) in self.matrices.iter().zip(xi) {
            if x == 0.0 {
                continue;
            }
            for r in 0..self.dim_to {
                let mut s = 0.0;
                for c in 0..self.dim_from {
                    s += m[(r, c)] * v[c];
                }
                out[r] += x * s;
            }
        }
        Ok(out)
    }

    pub(crate) fn apply_to_columns(&self, j: usize, v: &[f64], out: &mut [f64]) {
        let m = &self.matrices[j];
        for r in 0..self.dim_to {
            let mut s = 0.0;
            for c in 0..self.dim_from {
                s += m[(r, c)] * v[c];
            }
            out[r] += s;
        }
    }

    pub(crate) fn symbol_vector(&self, xi: &[f64], v: &[f64]) -> DVector<f64> {
        DVector::from_vec(
            self.tensor_apply(v, xi)
                .expect("dimensions checked by caller"),
        )
    }
}

/// The gradient of an `R^N`-valued function on `R^d`.
///
/// Output component `c * d + j` is `d_j u_c`.
pub fn gradient(dim_space: usize, dim_from: usize) -> Operator {
    let k = dim_space * dim_from;
    let matrices = (0..dim_space)
        .map(|j| {
            let mut m = DMatrix::zeros(k, dim_from);
            for c in 0..dim_from {
                m[(c * dim_space + j, c)] = 1.0;
            }
            m
        })
        .collect();
    let name = alloc::format!("gradient{}d", dim_space);
    Operator::new(Some(&name), matrices).expect("well-formed gradient")
}

/// Symmetric gradient `(Du + Du^T)/2` on `R^d`, listing the upper triangle
/// `(i, j), i <= j` row by row; e.g. `(e11, e12, e22)` for `d = 2`.
pub fn symmetric_gradient(dim_space: usize) -> Operator {
    let d = dim_space;
    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|i| (i..d).map(move |j| (i, j))).collect();
    let matrices = (0..d)
        .map(|dir| {
            let mut m = DMatrix::zeros(pairs.len(), d);
            for (row, &(i, j)) in pairs.iter().enumerate() {
                // e_ij = (d_i u_j + d_j u_i) / 2
                if i == j {
                    if dir == i {
                        m[(row, i)] = 1.0;
                    }
                } else {
                    if dir == i {
                        m[(row, j)] += 0.5;
                    }
                    if dir == j {
                        m[(row, i)] += 0.5;
                    }
                }
            }
            m
        })
        .collect();
    let name = alloc::format!("symgrad{}d", d);
    Operator::new(Some(&name), matrices).expect("well-formed symmetric gradient")
}

/// Cauchy-Riemann operator on `R^2`: `A_1 = I`, `A_2 = [[0, -1], [1, 0]]`.
pub fn cauchy_riemann() -> Operator {
    Operator::from_row_major(
        Some("cauchy_riemann"),
        2,
        2,
        2,
        &[
            alloc::vec![alloc::vec![1.0, 0.0], alloc::vec![0.0, 1.0]],
            alloc::vec![alloc::vec![0.0, -1.0], alloc::vec![1.0, 0.0]],
        ],
    )
    .expect("well-formed Cauchy-Riemann")
}

/// `A_1 = I`, `A_2 = 0` on `R^2` with `N = k = 2`: differentiates in `x_1` only.
pub fn partial_x_only() -> Operator {
    Operator::from_row_major(
        Some("dx_only"),
        2,
        2,
        2,
        &[
            alloc::vec![alloc::vec![1.0, 0.0], alloc::vec![0.0, 1.0]],
            alloc::vec![alloc::vec![0.0, 0.0], alloc::vec![0.0, 0.0]],
        ],
    )
    .expect("well-formed partial derivative")
}

/// Divergence of an `R^d`-valued field (`k = 1`).
pub fn divergence(dim_space: usize) -> Operator {
    let matrices = (0..dim_space)
        .map(|j| {
            let mut m = DMatrix::zeros(1, dim_space);
            m[(0, j)] = 1.0;
            m
        })
        .collect();
    let name = alloc::format!("divergence{}d", dim_space);
    Operator::new(Some(&name), matrices).expect("well-formed divergence")
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn gradient_symbol() {
        let op = gradient(2, 1);
        let s = op.symbol(&[3.0, 4.0]).unwrap();
        assert_eq!(s, DMatrix::from_row_slice(2, 1, &[3.0, 4.0]));
        assert_eq!(op.symbol(&[0.0, 0.0]).unwrap(), DMatrix::zeros(2, 1));
    }

    #[test]
    fn cauchy_riemann_complex_symbol_has_kernel() {
        let op = cauchy_riemann();
        let i = Complex::new(0.0, 1.0);
        let one = Complex::new(1.0, 0.0);
        let s = op.symbol_complex(&[one, i]).unwrap();
        assert_eq!(s[(0, 0)], one);
        assert_eq!(s[(0, 1)], -i);
        assert_eq!(s[(1, 0)], i);
        assert_eq!(s[(1, 1)], one);
        let v = nalgebra::DVector::from_vec(vec![one, -i]);
        let w = &s * v;
        assert!(w.norm() < 1e-15);
        let sv = s.svd(false, false).singular_values;
        assert!(sv.min() < 1e-15);
    }

    #[test]
    fn tensor_apply_examples() {
        assert_eq!(
            gradient(2, 1).tensor_apply(&[2.0], &[1.0, 1.0]).unwrap(),
            vec![2.0, 2.0]
        );
        assert_eq!(
            symmetric_gradient(2)
                .tensor_apply(&[1.0, 0.0], &[0.0, 1.0])
                .unwrap(),
            vec![0.0, 0.5, 0.0]
        );
        assert_eq!(
            cauchy_riemann()
                .tensor_apply(&[0.0, 0.0], &[0.3, 0.2])
                .unwrap(),
            vec![0.0, 0.0]
        );
    }

    #[test]
    fn dimension_errors() {
        let op = gradient(2, 1);
        assert!(matches!(
            op.symbol(&[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(op.tensor_apply(&[1.0, 2.0], &[1.0, 0.0]).is_err());
        assert!(Operator::new(None, vec![DMatrix::zeros(2, 1), DMatrix::zeros(1, 2)]).is_err());
    }

    #[test]
    fn symmetric_gradient_3d_shape() {
        let op = symmetric_gradient(3);
        assert_eq!((op.dim_space(), op.dim_from(), op.dim_to()), (3, 3, 6));
        // e_13 from d_3 u_1
        let v = op.tensor_apply(&[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0]).unwrap();
        assert_eq!(v, vec![0.0, 0.0, 0.5, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn adjoint_is_transpose() {
        let op = divergence(2);
        let adj = op.adjoint_matrices();
        assert_eq!(adj[1], DMatrix::from_row_slice(2, 1, &[0.0, 1.0]));
    }
}
