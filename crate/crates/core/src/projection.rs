//! `L^2(mu)`-orthogonal projection onto the polynomial nullspace for
//! discrete volume and surface measures.

use alloc::vec;
use alloc::vec::Vec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{check_len, Error, Result};
use crate::linalg::gram_schmidt;
use crate::nullspace::{KernelBasis, RANK_CUTOFF};
use crate::polynomial::PolynomialVectorField;
use crate::sphere::minimize_on_sphere;

pub const DEFAULT_CONSTANT_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureKind {
    /// Cell volumes `h^d`.
    Volume,
    /// Facet areas `h^(d-1)`.
    Surface,
}

/// A positive weighted point set.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    dim_space: usize,
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
    kind: MeasureKind,
    total_mass: f64,
}

impl DiscreteMeasure {
    pub fn new(
        dim_space: usize,
        points: Vec<Vec<f64>>,
        weights: Vec<f64>,
        kind: MeasureKind,
    ) -> Result<Self> {
        check_len("measure weights", points.len(), weights.len())?;
        if points.is_empty() {
            return Err(Error::InvalidInput("measure has no points".into()));
        }
        for p in &points {
            check_len("measure point", dim_space, p.len())?;
        }
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidInput(
                "measure weights must be positive and finite".into(),
            ));
        }
        let total_mass = weights.iter().sum();
        Ok(Self {
            dim_space,
            points,
            weights,
            kind,
            total_mass,
        })
    }

    pub fn dim_space(&self) -> usize {
        self.dim_space
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn kind(&self) -> MeasureKind {
        self.kind
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `sum_q w_q <a_q, b_q>` for point-major samples with `n` components.
    pub fn inner(&self, n: usize, a: &[f64], b: &[f64]) -> f64 {
        let mut s = 0.0;
        for (q, w) in self.weights.iter().enumerate() {
            let r = q * n..(q + 1) * n;
            s += w * crate::linalg::dot(&a[r.clone()], &b[r]);
        }
        s
    }

    /// `sum_q w_q |a_q|^p` raised to `1/p`.
    pub fn lp_norm(&self, n: usize, a: &[f64], p: f64) -> f64 {
        let s: f64 = self
            .weights
            .iter()
            .enumerate()
            .map(|(q, w)| w * libm::pow(crate::linalg::norm(&a[q * n..(q + 1) * n]), p))
            .sum();
        libm::pow(s, 1.0 / p)
    }

    /// Largest pointwise Euclidean norm.
    pub fn sup_norm(&self, n: usize, a: &[f64]) -> f64 {
        (0..self.len())
            .map(|q| crate::linalg::norm(&a[q * n..(q + 1) * n]))
            .fold(0.0, f64::max)
    }

    /// Samples a polynomial field at the measure points, point-major.
    pub fn sample(&self, p: &PolynomialVectorField) -> Vec<f64> {
        let n = p.dim_values();
        let mut out = vec![0.0; self.len() * n];
        for (q, x) in self.points.iter().enumerate() {
            p.evaluate_into(x, &mut out[q * n..(q + 1) * n]);
        }
        out
    }
}

/// The orthogonal projection onto `span N(A)` in `L^2(mu)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionOperator {
    kernel: Vec<PolynomialVectorField>,
    /// `e_j = sum_i onb[j][i] * kernel[i]`.
    onb: Vec<Vec<f64>>,
    /// `e_j` sampled at the measure points.
    onb_values: Vec<Vec<f64>>,
    measure: DiscreteMeasure,
    dim_values: usize,
}

/// Result of projecting a sampled field.
#[derive(Debug, Clone, PartialEq)]
pub struct Projected {
    /// `c_j = <u, e_j>_mu`.
    pub coefficients: Vec<f64>,
    pub field: PolynomialVectorField,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinfL1Estimate {
    pub value: f64,
    pub samples: usize,
    pub refine_rounds: usize,
    pub seed: u64,
    pub evaluations: usize,
}

/// Builds the projection by Gram-Schmidt in the `mu` inner product.
///
/// Kernel elements whose residual falls below a relative `1e-10` are
/// dropped, so `gram_rank` can be smaller than `dim N(A)` when the measure
/// cannot separate the kernel.
pub fn build_projection(kernel: &KernelBasis, mu: &DiscreteMeasure) -> Result<ProjectionOperator> {
    if kernel.elements.is_empty() {
        return Err(Error::InvalidInput("kernel basis is empty".into()));
    }
    check_len("measure dimension", kernel.dim_space, mu.dim_space())?;
    if !(mu.total_mass() > 0.0) {
        return Err(Error::InvalidInput("measure has zero mass".into()));
    }
    let n = kernel.dim_values;
    let sampled: Vec<Vec<f64>> = kernel.elements.iter().map(|p| mu.sample(p)).collect();
    let gs = gram_schmidt(&sampled, |a, b| mu.inner(n, a, b), RANK_CUTOFF);
    Ok(ProjectionOperator {
        kernel: kernel.elements.clone(),
        onb: gs.coefficients,
        onb_values: gs.basis,
        measure: mu.clone(),
        dim_values: n,
    })
}

impl ProjectionOperator {
    /// `l`, the number of orthonormal basis functions kept.
    pub fn gram_rank(&self) -> usize {
        self.onb.len()
    }

    pub fn kernel_dimension(&self) -> usize {
        self.kernel.len()
    }

    pub fn is_rank_deficient(&self) -> bool {
        self.gram_rank() < self.kernel_dimension()
    }

    pub fn measure(&self) -> &DiscreteMeasure {
        &self.measure
    }

    pub fn dim_values(&self) -> usize {
        self.dim_values
    }

    /// Coefficients of `e_j` over the kernel basis.
    pub fn onb(&self) -> &[Vec<f64>] {
        &self.onb
    }

    /// `e_j` sampled at the measure points.
    pub fn onb_values(&self, j: usize) -> &[f64] {
        &self.onb_values[j]
    }

    /// `e_j` as a polynomial.
    pub fn basis_function(&self, j: usize) -> PolynomialVectorField {
        self.combine(&self.onb[j])
    }

    fn combine(&self, kernel_coefficients: &[f64]) -> PolynomialVectorField {
        let first = &self.kernel[0];
        let mut out = PolynomialVectorField::zero(first.dim_space(), first.dim_values());
        for (p, &c) in self.kernel.iter().zip(kernel_coefficients) {
            if c != 0.0 {
                out = out
                    .add_scaled(p, c)
                    .expect("kernel elements share dimensions");
            }
        }
        out
    }

    /// Gram matrix of `e_1..e_l` under `mu`.
    pub fn gram(&self) -> Vec<Vec<f64>> {
        let n = self.dim_values;
        self.onb_values
            .iter()
            .map(|a| {
                self.onb_values
                    .iter()
                    .map(|b| self.measure.inner(n, a, b))
                    .collect()
            })
            .collect()
    }

    pub fn coefficients(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_len(
            "projected samples",
            self.measure.len() * self.dim_values,
            u.len(),
        )?;
        Ok(self
            .onb_values
            .iter()
            .map(|e| self.measure.inner(self.dim_values, u, e))
            .collect())
    }

    /// `Pi u` for `u` sampled point-major at the measure points.
    pub fn project(&self, u: &[f64]) -> Result<Projected> {
        let coefficients = self.coefficients(u)?;
        let mut kc = vec![0.0; self.kernel.len()];
        for (c, row) in coefficients.iter().zip(&self.onb) {
            crate::linalg::axpy(*c, row, &mut kc);
        }
        Ok(Projected {
            field: self.combine(&kc),
            coefficients,
        })
    }

    /// The extension of `Pi` to `L^1(mu)`; the same formula as [`Self::project`].
    pub fn l1_project(&self, u: &[f64]) -> Result<Projected> {
        self.project(u)
    }

    /// `Pi u` evaluated at the measure points.
    pub fn project_values(&self, u: &[f64]) -> Result<Vec<f64>> {
        let c = self.coefficients(u)?;
        Ok(self.values_from_coefficients(&c))
    }

    pub fn values_from_coefficients(&self, c: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.measure.len() * self.dim_values];
        for (cj, e) in c.iter().zip(&self.onb_values) {
            crate::linalg::axpy(*cj, e, &mut out);
        }
        out
    }

    /// Empirical constant `C` in `|q|_inf <= C |q|_{L^1(mu)}` on
    /// `span(e_1..e_l)`, maximized over the unit coefficient sphere.
    ///
    /// The search starts from every `+-e_j`, so the bound also holds for each
    /// basis function. The value is a lower bound on the exact constant.
    pub fn linf_l1_constant(
        &self,
        samples: usize,
        refine_rounds: usize,
        seed: u64,
    ) -> LinfL1Estimate {
        let l = self.gram_rank();
        let n = self.dim_values;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let starts: Vec<Vec<f64>> = (0..l)
            .flat_map(|j| {
                [1.0, -1.0].into_iter().map(move |s| {
                    let mut v = vec![0.0; l];
                    v[j] = s;
                    v
                })
            })
            .collect();
        let r = minimize_on_sphere(l, samples, refine_rounds, &mut rng, &starts, |a| {
            let q = self.values_from_coefficients(a);
            let l1 = self.measure.lp_norm(n, &q, 1.0);
            if l1 > 0.0 {
                -self.measure.sup_norm(n, &q) / l1
            } else {
                0.0
            }
        });
        LinfL1Estimate {
            value: -r.value,
            samples,
            refine_rounds,
            seed,
            evaluations: r.evaluations,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nullspace::kernel_basis;
    use crate::operator::{gradient, symmetric_gradient};

    fn grid_measure(side: f64, m: usize) -> DiscreteMeasure {
        let h = side / m as f64;
        let mut pts = Vec::new();
        for i in 0..m {
            for j in 0..m {
                pts.push(vec![(i as f64 + 0.5) * h, (j as f64 + 0.5) * h]);
            }
        }
        let w = vec![h * h; pts.len()];
        DiscreteMeasure::new(2, pts, w, MeasureKind::Volume).unwrap()
    }

    #[test]
    fn gradient_basis_is_normalized_constant() {
        let pi =
            build_projection(&kernel_basis(&gradient(2, 1), 2), &grid_measure(1.0, 8)).unwrap();
        assert_eq!(pi.gram_rank(), 1);
        let e = pi.basis_function(0);
        assert!((e.evaluate(&[0.3, 0.9]).unwrap()[0].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_gradient_gram_is_identity() {
        let mu = grid_measure(1.0, 64);
        let pi = build_projection(&kernel_basis(&symmetric_gradient(2), 8), &mu).unwrap();
        assert_eq!(pi.gram_rank(), 3);
        let g = pi.gram();
        for (i, row) in g.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((v - target).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn linf_l1_constant_for_constants() {
        let k = kernel_basis(&gradient(2, 1), 2);
        let unit = build_projection(&k, &grid_measure(1.0, 4)).unwrap();
        assert!((unit.linf_l1_constant(64, 1, 1).value - 1.0).abs() < 1e-12);
        let two = build_projection(&k, &grid_measure(2.0, 4)).unwrap();
        assert!((two.linf_l1_constant(64, 1, 1).value - 0.25).abs() < 1e-12);
    }

    #[test]
    fn point_measure_is_rank_deficient_for_rigid_motions() {
        let mu =
            DiscreteMeasure::new(2, vec![vec![0.5, 0.5]], vec![1.0], MeasureKind::Volume).unwrap();
        let pi = build_projection(&kernel_basis(&symmetric_gradient(2), 4), &mu).unwrap();
        assert_eq!(pi.gram_rank(), 2);
        assert!(pi.is_rank_deficient());
    }

    #[test]
    fn rejects_bad_measures() {
        assert!(DiscreteMeasure::new(2, vec![], vec![], MeasureKind::Volume).is_err());
        assert!(
            DiscreteMeasure::new(2, vec![vec![0.0, 0.0]], vec![0.0], MeasureKind::Volume).is_err()
        );
        assert!(DiscreteMeasure::new(2, vec![vec![0.0]], vec![1.0], MeasureKind::Volume).is_err());
    }
}
