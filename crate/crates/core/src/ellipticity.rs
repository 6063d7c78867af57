//! Numerical certification of real/complex ellipticity and of the
//! cancelling condition.
//!
//! Ellipticity asks that `A[xi]` be injective for every nonzero `xi` in
//! `K^d`. Both sides are homogeneous in `xi`, so it is enough to bound the
//! smallest singular value of `A[xi]` away from zero on the unit sphere.
//! The sphere minimum is searched by seeded sampling plus local refinement,
//! so the reported value is an upper bound on the true minimum.
//!
//! "Cancelling" follows the usual definition from the literature on
//! limiting Sobolev inequalities: the intersection of the images
//! `im A[xi]` over all nonzero real `xi` is trivial.

use alloc::vec::Vec;
use nalgebra::{Complex, DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{column_space, intersect_subspaces};
use crate::operator::Operator;
use crate::sphere::{minimize_on_sphere, random_unit};

pub const DEFAULT_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_SAMPLES: usize = 4096;
pub const DEFAULT_REFINE_ROUNDS: usize = 3;
/// Consecutive samples without a drop in dimension before the image
/// intersection is declared stable.
pub const CANCELLING_STABLE_RUN: usize = 10;
const WITNESS_POLISH_STEPS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Real,
    Complex,
}

/// A vector over the real or complex field.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldVector {
    Real(Vec<f64>),
    Complex(Vec<Complex<f64>>),
}

impl FieldVector {
    pub fn norm(&self) -> f64 {
        match self {
            FieldVector::Real(v) => crate::linalg::norm(v),
            FieldVector::Complex(v) => libm::sqrt(v.iter().map(|z| z.norm_sqr()).sum()),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            FieldVector::Real(v) => v.len(),
            FieldVector::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_complex(&self) -> Vec<Complex<f64>> {
        match self {
            FieldVector::Real(v) => v.iter().map(|x| Complex::new(*x, 0.0)).collect(),
            FieldVector::Complex(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchParams {
    pub samples: usize,
    pub refine_rounds: usize,
    pub seed: u64,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self {
            samples: DEFAULT_SAMPLES,
            refine_rounds: DEFAULT_REFINE_ROUNDS,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SphereMinimum {
    pub value: f64,
    pub argmin: FieldVector,
    pub evaluations: usize,
}

fn sigma_min_real(m: &DMatrix<f64>) -> f64 {
    if m.nrows() < m.ncols() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.min()
}

fn sigma_min_complex(m: &DMatrix<Complex<f64>>) -> f64 {
    if m.nrows() < m.ncols() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.min()
}

fn complex_from_coords(x: &[f64], d: usize) -> Vec<Complex<f64>> {
    (0..d).map(|j| Complex::new(x[j], x[d + j])).collect()
}

/// Minimum over visited unit directions of the smallest singular value of
/// `A[xi]`. Complex directions are sampled as unit vectors of `R^{2d}`.
pub fn min_singular_over_sphere(
    op: &Operator,
    field: Field,
    params: SearchParams,
) -> Result<SphereMinimum> {
    if params.samples == 0 {
        return Err(Error::InvalidInput(
            "sphere search needs at least one sample".into(),
        ));
    }
    let d = op.dim_space();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    match field {
        Field::Real => {
            let r = minimize_on_sphere(
                d,
                params.samples,
                params.refine_rounds,
                &mut rng,
                &[],
                |x| sigma_min_real(&op.symbol(x).expect("direction has length d")),
            );
            Ok(SphereMinimum {
                value: r.value,
                argmin: FieldVector::Real(r.argmin),
                evaluations: r.evaluations,
            })
        }
        Field::Complex => {
            let r = minimize_on_sphere(
                2 * d,
                params.samples,
                params.refine_rounds,
                &mut rng,
                &[],
                |x| {
                    let xi = complex_from_coords(x, d);
                    sigma_min_complex(&op.symbol_complex(&xi).expect("direction has length d"))
                },
            );
            Ok(SphereMinimum {
                value: r.value,
                argmin: FieldVector::Complex(complex_from_coords(&r.argmin, d)),
                evaluations: r.evaluations,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EllipticityVerdict {
    Elliptic,
    NotElliptic,
}

/// A pair `(xi, v)` of unit vectors with `|A[xi] v|` at most the tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub xi: FieldVector,
    pub v: FieldVector,
    /// `|A[xi] v|` re-evaluated after normalization.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EllipticityCertificate {
    pub field: Field,
    pub verdict: EllipticityVerdict,
    pub min_singular: f64,
    pub witness: Option<Witness>,
    pub samples: usize,
    pub refine_rounds: usize,
    pub seed: u64,
    pub tolerance: f64,
    /// Set when the sphere minimum lies within two decades of the
    /// tolerance, i.e. the verdict depends on the chosen tolerance.
    pub near_tolerance: bool,
}

impl EllipticityCertificate {
    pub fn is_elliptic(&self) -> bool {
        self.verdict == EllipticityVerdict::Elliptic
    }
}

/// Index of the first entry whose magnitude is at least half the largest.
fn leading_index(mags: &[f64]) -> usize {
    let max = mags.iter().cloned().fold(0.0, f64::max);
    mags.iter().position(|m| *m >= 0.5 * max).unwrap_or(0)
}

fn canonical_real(v: &mut [f64]) {
    let mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    let i = leading_index(&mags);
    if v[i] < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
    for x in v.iter_mut() {
        if *x == 0.0 {
            *x = 0.0; // drop negative zero
        }
    }
}

fn phase_normalize(v: &mut [Complex<f64>]) {
    let mags: Vec<f64> = v.iter().map(|z| libm::hypot(z.re, z.im)).collect();
    let i = leading_index(&mags);
    if mags[i] > 0.0 {
        let phase = v[i].conj() / mags[i];
        for z in v.iter_mut() {
            *z *= phase;
        }
        v[i] = Complex::new(mags[i], 0.0);
    }
}

/// Canonical representative of a complex witness up to the symmetries of a
/// real operator: independent unit phases on `xi` and `v`, and joint complex
/// conjugation. The leading entry of each vector is made real positive, then
/// the first entry of `xi` with a non-negligible imaginary part is made to
/// have a positive imaginary part.
fn canonical_complex(xi: &mut [Complex<f64>], v: &mut [Complex<f64>]) {
    phase_normalize(xi);
    phase_normalize(v);
    if let Some(z) = xi.iter().find(|z| z.im.abs() > 1e-12) {
        if z.im < 0.0 {
            for z in xi.iter_mut() {
                *z = z.conj();
            }
            for z in v.iter_mut() {
                *z = z.conj();
            }
        }
    }
}

fn smallest_right_singular(m: &DMatrix<f64>) -> (f64, Vec<f64>) {
    let padded = pad(m, 0.0);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let i = svd.singular_values.imin();
    (svd.singular_values[i], v_t.row(i).iter().cloned().collect())
}

/// Alternating refinement of a real witness: with `v` fixed, `xi` minimizes
/// `|sum_j xi_j A_j v|`; with `xi` fixed, `v` minimizes `|A[xi] v|`.
fn real_witness(op: &Operator, xi: &[f64]) -> Witness {
    let mut xi = xi.to_vec();
    let (mut best, mut v) =
        smallest_right_singular(&op.symbol(&xi).expect("direction has length d"));
    for _ in 0..WITNESS_POLISH_STEPS {
        let mut b = DMatrix::zeros(op.dim_to(), op.dim_space());
        for j in 0..op.dim_space() {
            let mut col = alloc::vec![0.0; op.dim_to()];
            op.apply_to_columns(j, &v, &mut col);
            b.set_column(j, &DVector::from_vec(col));
        }
        let (_, xi_next) = smallest_right_singular(&b);
        let (s, v_next) =
            smallest_right_singular(&op.symbol(&xi_next).expect("direction has length d"));
        if s >= best {
            break;
        }
        best = s;
        xi = xi_next;
        v = v_next;
    }
    canonical_real(&mut xi);
    canonical_real(&mut v);
    let residual = op.symbol_vector(&xi, &v).norm();
    Witness {
        xi: FieldVector::Real(xi),
        v: FieldVector::Real(v),
        residual,
    }
}

fn complex_witness(op: &Operator, xi: &[Complex<f64>]) -> Witness {
    let m = op.symbol_complex(xi).expect("direction has length d");
    let padded = pad(&m, Complex::new(0.0, 0.0));
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let i = svd.singular_values.imin();
    let mut v: Vec<Complex<f64>> = v_t.row(i).iter().map(|z| z.conj()).collect();
    let mut xi = xi.to_vec();
    canonical_complex(&mut xi, &mut v);
    let sym = op.symbol_complex(&xi).expect("direction has length d");
    let residual = (sym * DVector::from_vec(v.clone())).norm();
    Witness {
        xi: FieldVector::Complex(xi),
        v: FieldVector::Complex(v),
        residual,
    }
}

fn pad<T: nalgebra::Scalar>(m: &DMatrix<T>, zero: T) -> DMatrix<T> {
    if m.nrows() >= m.ncols() {
        return m.clone();
    }
    let mut p = DMatrix::from_element(m.ncols(), m.ncols(), zero);
    p.view_mut((0, 0), (m.nrows(), m.ncols())).copy_from(m);
    p
}

/// Certifies `K`-ellipticity: elliptic iff the refined sphere minimum of
/// `sigma_min(A[xi])` exceeds `tolerance`; otherwise a witness `(xi, v)` is
/// returned with `v` the right-singular vector of the smallest singular
/// value at the minimizing direction.
pub fn check_ellipticity(
    op: &Operator,
    field: Field,
    tolerance: f64,
    params: SearchParams,
) -> Result<EllipticityCertificate> {
    if !(tolerance > 0.0) {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    let mut min = min_singular_over_sphere(op, field, params)?;
    let witness = if min.value > tolerance {
        None
    } else {
        let w = match &min.argmin {
            FieldVector::Real(xi) => real_witness(op, xi),
            FieldVector::Complex(xi) => complex_witness(op, xi),
        };
        min.value = min.value.min(w.residual);
        Some(w)
    };
    let elliptic = witness.is_none();
    Ok(EllipticityCertificate {
        field,
        verdict: if elliptic {
            EllipticityVerdict::Elliptic
        } else {
            EllipticityVerdict::NotElliptic
        },
        min_singular: min.value,
        witness,
        samples: params.samples,
        refine_rounds: params.refine_rounds,
        seed: params.seed,
        tolerance,
        near_tolerance: min.value > tolerance * 1e-2 && min.value <= tolerance * 1e2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CancellingVerdict {
    Cancelling,
    NotCancelling,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CancellingCertificate {
    pub verdict: CancellingVerdict,
    /// Dimension of the accumulated intersection of the sampled images.
    pub residual_dim: usize,
    pub witness_directions: Vec<Vec<f64>>,
    pub tolerance: f64,
    pub seed: u64,
}

impl CancellingCertificate {
    pub fn is_cancelling(&self) -> bool {
        self.verdict == CancellingVerdict::Cancelling
    }
}

/// Intersects `im A[xi]` over seeded unit directions until the dimension of
/// the intersection has not changed for ten consecutive samples.
///
/// In one space dimension the image does not depend on `xi`, so the result
/// is never cancelling and the residual dimension is `rank A_1`. For `d >= 2`
/// the operator must be real-elliptic; this is re-checked here.
pub fn check_cancelling(
    op: &Operator,
    samples: usize,
    tolerance: f64,
    seed: u64,
) -> Result<CancellingCertificate> {
    if samples == 0 {
        return Err(Error::InvalidInput(
            "cancelling check needs at least one sample".into(),
        ));
    }
    if !(tolerance > 0.0) {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    if op.dim_space() == 1 {
        let rank = column_space(op.matrix(0), tolerance).ncols();
        return Ok(CancellingCertificate {
            verdict: if rank == 0 {
                CancellingVerdict::Cancelling
            } else {
                CancellingVerdict::NotCancelling
            },
            residual_dim: rank,
            witness_directions: alloc::vec![alloc::vec![1.0]],
            tolerance,
            seed,
        });
    }
    let real = check_ellipticity(
        op,
        Field::Real,
        DEFAULT_TOLERANCE,
        SearchParams {
            samples: 1024,
            refine_rounds: 2,
            seed,
        },
    )?;
    if !real.is_elliptic() {
        return Err(Error::Precondition(alloc::format!(
            "operator {} is not real-elliptic (sphere minimum {:e})",
            op.label(),
            real.min_singular
        )));
    }
    let d = op.dim_space();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut directions = Vec::new();
    let first = random_unit(&mut rng, d);
    let mut current = column_space(&op.symbol(&first)?, tolerance);
    directions.push(first);
    let mut unchanged = 0usize;
    while current.ncols() > 0 && directions.len() < samples && unchanged < CANCELLING_STABLE_RUN {
        let xi = random_unit(&mut rng, d);
        let image = column_space(&op.symbol(&xi)?, tolerance);
        let next = intersect_subspaces(&current, &image, tolerance);
        if next.ncols() == current.ncols() {
            unchanged += 1;
        } else {
            unchanged = 0;
        }
        current = next;
        directions.push(xi);
    }
    let residual_dim = current.ncols();
    Ok(CancellingCertificate {
        verdict: if residual_dim == 0 {
            CancellingVerdict::Cancelling
        } else {
            CancellingVerdict::NotCancelling
        },
        residual_dim,
        witness_directions: directions,
        tolerance,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{
        cauchy_riemann, divergence, gradient, partial_x_only, symmetric_gradient,
    };

    fn quick() -> SearchParams {
        SearchParams {
            samples: 512,
            refine_rounds: 3,
            seed: 42,
        }
    }

    #[test]
    fn gradient_sphere_minimum_is_one() {
        let m = min_singular_over_sphere(&gradient(2, 1), Field::Real, quick()).unwrap();
        assert!((m.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_operator_vanishes_at_second_axis() {
        let cert = check_ellipticity(&partial_x_only(), Field::Real, 1e-8, quick()).unwrap();
        assert_eq!(cert.verdict, EllipticityVerdict::NotElliptic);
        let w = cert.witness.unwrap();
        let FieldVector::Real(xi) = &w.xi else {
            panic!()
        };
        assert!(xi[0].abs() < 1e-8 && (xi[1] - 1.0).abs() < 1e-12);
        assert!(w.residual <= 1e-8);
    }

    #[test]
    fn cauchy_riemann_verdicts() {
        let op = cauchy_riemann();
        assert!(check_ellipticity(&op, Field::Real, 1e-8, quick())
            .unwrap()
            .is_elliptic());
        let c = check_ellipticity(&op, Field::Complex, 1e-8, quick()).unwrap();
        assert!(!c.is_elliptic());
        let w = c.witness.unwrap();
        let FieldVector::Complex(xi) = &w.xi else {
            panic!()
        };
        let s = core::f64::consts::FRAC_1_SQRT_2;
        assert!((xi[0] - Complex::new(s, 0.0)).norm_sqr() < 1e-14);
        assert!((xi[1] - Complex::new(0.0, s)).norm_sqr() < 1e-14);
        assert!(w.residual <= 1e-8);
        assert!((w.v.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tolerance_must_be_positive() {
        assert!(check_ellipticity(&gradient(1, 1), Field::Real, 0.0, quick()).is_err());
    }

    #[test]
    fn divergence_is_not_elliptic_in_either_field() {
        let op = divergence(2);
        for field in [Field::Real, Field::Complex] {
            let c = check_ellipticity(&op, field, 1e-8, quick()).unwrap();
            assert!(!c.is_elliptic());
            assert_eq!(c.min_singular, 0.0);
        }
    }

    #[test]
    fn cancelling_examples() {
        assert!(check_cancelling(&gradient(2, 1), 64, 1e-8, 42)
            .unwrap()
            .is_cancelling());
        assert!(check_cancelling(&symmetric_gradient(2), 64, 1e-8, 42)
            .unwrap()
            .is_cancelling());
        let one = check_cancelling(&gradient(1, 3), 64, 1e-8, 42).unwrap();
        assert!(!one.is_cancelling());
        assert_eq!(one.residual_dim, 3);
        assert!(matches!(
            check_cancelling(&divergence(2), 64, 1e-8, 42),
            Err(Error::Precondition(_))
        ));
    }
}
