//! Poincaré-type constants with subset and trace constraints, the
//! trace-style Sobolev inequality, the ball scaling study and the hyperplane
//! blow-up for operators that fail real ellipticity.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::domain::{select_hypersurface, Hypersurface, Shape, Side, VoxelDomain};
use crate::eigen::{constrained_smallest_eigenpair, DEFAULT_BLOCK, DEFAULT_RESIDUAL_TOL};
use crate::ellipticity::{
    check_cancelling, check_ellipticity, CancellingCertificate, Field, SearchParams,
};
use crate::error::{Error, Result};
use crate::grid::{
    apply_discrete, boundary_term, cell_lp_norm, discrete_operator, trace_restrict, GridFunction,
};
use crate::linalg::{axpy, dot, gram_schmidt, norm};
use crate::nullspace::{hyperplane_counterexample, kernel_basis, KernelBasis, DEFAULT_DEGREE_CAP};
use crate::operator::Operator;
use crate::projection::{build_projection, DiscreteMeasure, ProjectionOperator};
use crate::sampling::{MollifiedIndicator, SampleField, SmoothField};

/// Ratios with a right-hand side below this are treated as `0/0` or blow-up.
pub const ZERO_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    /// `Pi_E u = 0` for the listed domain cells `E`.
    Subset(Vec<usize>),
    /// `Pi_Gamma tr u = 0`.
    Trace(Hypersurface),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InequalityKind {
    SubsetPoincare,
    TracePoincare,
    SobolevTrace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Eigenproblem,
    SampleMax,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenInfo {
    pub lambda: f64,
    pub residual: f64,
    pub iterations: usize,
    /// `|Pi u*|_{L^2(mu)}` for the `L^2(Omega)`-normalized eigenvector.
    pub constraint_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstantEstimate {
    pub inequality: InequalityKind,
    pub p: f64,
    pub value: f64,
    pub method: Method,
    pub eigen: Option<EigenInfo>,
    /// Minimizing eigenvector, point-major over cells.
    pub eigenvector: Option<Vec<f64>>,
    pub h: f64,
    pub seed: Option<u64>,
    pub sample_count: usize,
    pub skipped: usize,
    pub blowup_witnesses: usize,
    pub violations: usize,
    pub gram_rank: usize,
    pub kernel_dimension: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub samples: usize,
    pub skipped: usize,
    pub violations: usize,
    pub worst_ratio: f64,
    pub tol_rel: f64,
    pub seed: u64,
}

/// An operator, domain and constraint together with the projection the
/// constraint defines.
#[derive(Debug, Clone)]
pub struct PoincareProblem {
    op: Operator,
    domain: VoxelDomain,
    constraint: Constraint,
    kernel: KernelBasis,
    projection: ProjectionOperator,
    /// Orthonormal basis functions `e_j` sampled at every cell.
    basis_on_cells: Vec<Vec<f64>>,
    warnings: Vec<String>,
}

impl PoincareProblem {
    /// Checks the hypotheses (stabilized polynomial kernel, connected domain,
    /// full-rank projection) and builds the projection for the constraint.
    pub fn new(op: &Operator, domain: &VoxelDomain, constraint: Constraint) -> Result<Self> {
        if op.dim_space() != domain.dim() {
            return Err(Error::DimensionMismatch {
                what: "operator and domain dimension",
                expected: domain.dim(),
                got: op.dim_space(),
            });
        }
        let kernel = kernel_basis(op, DEFAULT_DEGREE_CAP);
        if !kernel.stabilized {
            let mut msg = alloc::format!(
                "operator {} has no finite polynomial kernel up to degree {}; it is not C-elliptic",
                op.label(),
                DEFAULT_DEGREE_CAP
            );
            if matches!(constraint, Constraint::Trace(_)) {
                let real = check_ellipticity(op, Field::Real, 1e-8, SearchParams::default())?;
                if !real.is_elliptic() {
                    msg.push_str(
                        "; it is also not R-elliptic, so a kernel element vanishes on a hyperplane and no trace Poincaré constant can exist",
                    );
                }
            }
            return Err(Error::Precondition(msg));
        }
        if !domain.is_connected() {
            return Err(Error::Precondition("domain is not connected".into()));
        }
        let (mu, label) = match &constraint {
            Constraint::Subset(cells) => {
                if cells.is_empty() {
                    return Err(Error::InvalidInput("subset E has no cells".into()));
                }
                (domain.volume_measure(Some(cells))?, "subset E")
            }
            Constraint::Trace(gamma) => {
                gamma.side_cells()?;
                (gamma.measure()?, "hypersurface Gamma")
            }
        };
        let projection = build_projection(&kernel, &mu)?;
        if projection.is_rank_deficient() {
            return Err(Error::Degenerate(alloc::format!(
                "the projection on {} has rank {} < dim N(A) = {}; the constraint is too small to fix the kernel",
                label,
                projection.gram_rank(),
                projection.kernel_dimension()
            )));
        }
        let basis_on_cells = (0..projection.gram_rank())
            .map(|j| {
                GridFunction::from_polynomial(domain, &projection.basis_function(j))
                    .expect("kernel matches domain dimension")
                    .into_values()
            })
            .collect();
        Ok(Self {
            op: op.clone(),
            domain: domain.clone(),
            constraint,
            kernel,
            projection,
            basis_on_cells,
            warnings: Vec::new(),
        })
    }

    pub fn operator(&self) -> &Operator {
        &self.op
    }

    pub fn domain(&self) -> &VoxelDomain {
        &self.domain
    }

    pub fn constraint(&self) -> &Constraint {
        &self.constraint
    }

    pub fn kernel(&self) -> &KernelBasis {
        &self.kernel
    }

    pub fn projection(&self) -> &ProjectionOperator {
        &self.projection
    }

    pub fn kind(&self) -> InequalityKind {
        match self.constraint {
            Constraint::Subset(_) => InequalityKind::SubsetPoincare,
            Constraint::Trace(_) => InequalityKind::TracePoincare,
        }
    }

    /// Samples of `u` (or of its trace) at the projection's measure points.
    fn constrained_samples(&self, u: &GridFunction) -> Result<Vec<f64>> {
        match &self.constraint {
            Constraint::Subset(cells) => {
                let n = u.components();
                let mut out = Vec::with_capacity(cells.len() * n);
                for &c in cells {
                    out.extend_from_slice(u.at(c));
                }
                Ok(out)
            }
            Constraint::Trace(gamma) => Ok(trace_restrict(&self.domain, u, gamma)?.into_values()),
        }
    }

    /// Coefficients of `Pi_E u` or `Pi_Gamma tr u` in the orthonormal basis.
    pub fn projection_coefficients(&self, u: &GridFunction) -> Result<Vec<f64>> {
        self.projection.coefficients(&self.constrained_samples(u)?)
    }

    /// `Pi u` as a cell function on the whole domain.
    pub fn project(&self, u: &GridFunction) -> Result<GridFunction> {
        let c = self.projection_coefficients(u)?;
        let mut out = vec![0.0; u.values().len()];
        for (cj, e) in c.iter().zip(&self.basis_on_cells) {
            axpy(*cj, e, &mut out);
        }
        GridFunction::new(u.kind(), u.components(), out)
    }

    /// `u - Pi u`.
    pub fn remainder(&self, u: &GridFunction) -> Result<GridFunction> {
        u.add_scaled(&self.project(u)?, -1.0)
    }

    /// Rows `C` with `C u` the projection coefficients, orthonormalized.
    pub fn constraint_rows(&self) -> Vec<Vec<f64>> {
        let n = self.op.dim_from();
        let size = self.domain.num_cells() * n;
        let mu = self.projection.measure();
        let rows: Vec<Vec<f64>> = (0..self.projection.gram_rank())
            .map(|j| {
                let e = self.projection.onb_values(j);
                let mut row = vec![0.0; size];
                let cells: Vec<usize> = match &self.constraint {
                    Constraint::Subset(cells) => cells.clone(),
                    Constraint::Trace(gamma) => {
                        gamma.side_cells().expect("checked at construction")
                    }
                };
                for (q, &c) in cells.iter().enumerate() {
                    let w = mu.weights()[q];
                    for i in 0..n {
                        row[c * n + i] += w * e[q * n + i];
                    }
                }
                row
            })
            .collect();
        gram_schmidt(&rows, dot, 1e-24).basis
    }

    /// `|u - Pi u|_{L^p} / |A_h u|_{L^p}`, or `None` for a `0/0` sample.
    /// `Some(inf)` marks a blow-up: positive numerator, vanishing right side.
    pub fn ratio(&self, u: &GridFunction, p: f64) -> Result<Option<f64>> {
        let num = cell_lp_norm(&self.domain, &self.remainder(u)?, p);
        let den = cell_lp_norm(&self.domain, &apply_discrete(&self.op, &self.domain, u)?, p);
        let scale = cell_lp_norm(&self.domain, u, p).max(1.0);
        if den <= ZERO_THRESHOLD * scale {
            if num <= 1e-9 * scale {
                return Ok(None);
            }
            return Ok(Some(f64::INFINITY));
        }
        Ok(Some(num / den))
    }

    fn random_field(&self, rng: &mut ChaCha8Rng) -> GridFunction {
        let (lo, hi) = self.domain.bounding_box();
        let f = SmoothField::random(rng, self.op.dim_from(), &lo, &hi);
        GridFunction::from_fn(&self.domain, self.op.dim_from(), |x, o| {
            f.evaluate_into(x, o)
        })
    }

    /// The `p = 2` constant `lambda_min^(-1/2)` of the discrete pencil
    /// `(A_h^T W A_h, W)` restricted to `{Pi u = 0}`, `W = h^d I`.
    pub fn poincare_constant_p2(&self) -> Result<ConstantEstimate> {
        let a = discrete_operator(&self.op, &self.domain)?;
        let k = a.gram();
        let rows = self.constraint_rows();
        let pair = constrained_smallest_eigenpair(&k, &rows, DEFAULT_BLOCK, DEFAULT_RESIDUAL_TOL)?;
        if !(pair.value > 0.0) {
            return Err(Error::Degenerate(alloc::format!(
                "discrete operator has a kernel outside the constraint (lambda = {:e})",
                pair.value
            )));
        }
        let n = self.op.dim_from();
        let l2 = libm::sqrt(self.domain.cell_volume());
        let normalized: Vec<f64> = pair.vector.iter().map(|v| v / l2).collect();
        let u = GridFunction::new(crate::grid::GridKind::Cell, n, normalized.clone())?;
        let constraint_residual = norm(&self.projection_coefficients(&u)?);
        Ok(ConstantEstimate {
            inequality: self.kind(),
            p: 2.0,
            value: 1.0 / libm::sqrt(pair.value),
            method: Method::Eigenproblem,
            eigen: Some(EigenInfo {
                lambda: pair.value,
                residual: pair.residual,
                iterations: pair.iterations,
                constraint_residual,
            }),
            eigenvector: Some(normalized),
            h: self.domain.h(),
            seed: None,
            sample_count: 0,
            skipped: 0,
            blowup_witnesses: 0,
            violations: 0,
            gram_rank: self.projection.gram_rank(),
            kernel_dimension: self.kernel.dimension(),
            warnings: self.warnings.clone(),
        })
    }

    /// Largest ratio over `sample_count` seeded smooth fields, a lower bound
    /// for the `L^p` constant.
    pub fn sample_lower_bound(
        &self,
        p: f64,
        sample_count: usize,
        seed: u64,
    ) -> Result<ConstantEstimate> {
        if !(p >= 1.0) || !p.is_finite() {
            return Err(Error::InvalidInput("p must be a finite number >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut best = 0.0f64;
        let (mut skipped, mut blowups) = (0, 0);
        for _ in 0..sample_count {
            let u = self.random_field(&mut rng);
            match self.ratio(&u, p)? {
                None => skipped += 1,
                Some(r) if r.is_infinite() => blowups += 1,
                Some(r) => best = best.max(r),
            }
        }
        let mut warnings = self.warnings.clone();
        if blowups > 0 {
            warnings.push(alloc::format!(
                "{} samples have vanishing A-variation but do not lie in the kernel",
                blowups
            ));
        }
        Ok(ConstantEstimate {
            inequality: self.kind(),
            p,
            value: best,
            method: Method::SampleMax,
            eigen: None,
            eigenvector: None,
            h: self.domain.h(),
            seed: Some(seed),
            sample_count,
            skipped,
            blowup_witnesses: blowups,
            violations: 0,
            gram_rank: self.projection.gram_rank(),
            kernel_dimension: self.kernel.dimension(),
            warnings,
        })
    }

    pub fn l1_lower_bound(&self, sample_count: usize, seed: u64) -> Result<ConstantEstimate> {
        self.sample_lower_bound(1.0, sample_count, seed)
    }

    /// Counts fresh samples with `|u - Pi u|_p > (1 + 10 h) C |A_h u|_p`.
    pub fn verify(
        &self,
        estimate: &ConstantEstimate,
        samples: usize,
        seed: u64,
    ) -> Result<VerificationReport> {
        if estimate.inequality != self.kind() || estimate.h != self.domain.h() {
            return Err(Error::InvalidInput(
                "estimate was built for a different problem".into(),
            ));
        }
        let tol_rel = 10.0 * self.domain.h();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut report = VerificationReport {
            samples,
            skipped: 0,
            violations: 0,
            worst_ratio: 0.0,
            tol_rel,
            seed,
        };
        for _ in 0..samples {
            let u = self.random_field(&mut rng);
            match self.ratio(&u, estimate.p)? {
                None => report.skipped += 1,
                Some(r) => {
                    report.worst_ratio = report.worst_ratio.max(r);
                    if r > (1.0 + tol_rel) * estimate.value {
                        report.violations += 1;
                    }
                }
            }
        }
        Ok(report)
    }
}

pub fn poincare_constant_p2(
    op: &Operator,
    domain: &VoxelDomain,
    constraint: Constraint,
) -> Result<ConstantEstimate> {
    PoincareProblem::new(op, domain, constraint)?.poincare_constant_p2()
}

pub fn poincare_l1_lower_bound(
    op: &Operator,
    domain: &VoxelDomain,
    constraint: Constraint,
    sample_count: usize,
    seed: u64,
) -> Result<ConstantEstimate> {
    PoincareProblem::new(op, domain, constraint)?.l1_lower_bound(sample_count, seed)
}

pub fn verify_inequality(
    problem: &PoincareProblem,
    estimate: &ConstantEstimate,
    fresh_samples: usize,
    seed: u64,
) -> Result<VerificationReport> {
    problem.verify(estimate, fresh_samples, seed)
}

/// `Gamma = partial Omega` as a hypersurface (`omega = Omega`).
pub fn full_boundary(domain: &VoxelDomain) -> Result<Hypersurface> {
    select_hypersurface(domain, domain.shape(), Side::Inside)
}

/// `(sum h^d |u|^q)^(1/q)` with `q = d/(d-1)`.
pub fn sobolev_lhs(domain: &VoxelDomain, u: &GridFunction) -> f64 {
    let d = domain.dim() as f64;
    cell_lp_norm(domain, u, d / (d - 1.0))
}

/// `|A_h u|(Omega) + |tr u (x)_A nu|_{L^1(partial Omega)}`.
pub fn sobolev_rhs(op: &Operator, domain: &VoxelDomain, u: &GridFunction) -> Result<f64> {
    let interior = cell_lp_norm(domain, &apply_discrete(op, domain, u)?, 1.0);
    Ok(interior + boundary_term(op, domain, u)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DilationRow {
    pub radius: f64,
    pub h: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DilationStudy {
    pub rows: Vec<DilationRow>,
    pub max_deviation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SobolevReport {
    pub samples: usize,
    pub skipped: usize,
    /// Samples with positive left side and vanishing right side.
    pub unbounded: usize,
    pub max_ratio: f64,
    pub h: f64,
    pub seed: u64,
    pub cancelling: CancellingCertificate,
    pub dilation: DilationStudy,
}

/// Relative spread `max |x_i - mean| / mean`.
pub fn max_relative_deviation(values: &[f64]) -> f64 {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values
        .iter()
        .map(|v| (v - mean).abs() / mean)
        .fold(0.0, f64::max)
}

/// Ratio of the two sides for `u_r(x) = u(x / r)` on `B_r` with
/// `h = r / cells_per_radius`.
pub fn sobolev_dilation_study(
    op: &Operator,
    profile: &MollifiedIndicator,
    radii: &[f64],
    cells_per_radius: usize,
) -> Result<DilationStudy> {
    if radii.is_empty() || cells_per_radius == 0 {
        return Err(Error::InvalidInput(
            "dilation study needs radii and a resolution".into(),
        ));
    }
    let d = op.dim_space();
    let center = vec![0.0; d];
    let mut rows = Vec::new();
    for &r in radii {
        let h = r / cells_per_radius as f64;
        let dom = VoxelDomain::build_ball(&center, r, h)?;
        let u = GridFunction::from_fn(&dom, op.dim_from(), |x, o| {
            let y: Vec<f64> = x.iter().map(|v| v / r).collect();
            profile.evaluate_into(&y, o)
        });
        let lhs = sobolev_lhs(&dom, &u);
        let rhs = sobolev_rhs(op, &dom, &u)?;
        rows.push(DilationRow {
            radius: r,
            h,
            lhs,
            rhs,
            ratio: lhs / rhs,
        });
    }
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    Ok(DilationStudy {
        max_deviation: max_relative_deviation(&ratios),
        rows,
    })
}

/// Empirical check of `|u|_{d/(d-1)} <= C (|Au|(Omega) + |tr u (x)_A nu|_{L^1(partial Omega)})`
/// on alternating smooth fields and mollified indicators.
pub fn sobolev_trace_verify(
    op: &Operator,
    domain: &VoxelDomain,
    sample_count: usize,
    seed: u64,
) -> Result<SobolevReport> {
    if op.dim_space() < 2 {
        return Err(Error::Precondition(
            "the trace-style Sobolev inequality needs d >= 2: in one dimension no operator is cancelling".into(),
        ));
    }
    if op.dim_space() != domain.dim() {
        return Err(Error::DimensionMismatch {
            what: "operator and domain dimension",
            expected: domain.dim(),
            got: op.dim_space(),
        });
    }
    let cancelling = check_cancelling(op, 64, 1e-8, seed)?;
    if !cancelling.is_cancelling() {
        return Err(Error::Precondition(alloc::format!(
            "operator {} is not cancelling (residual image dimension {})",
            op.label(),
            cancelling.residual_dim
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = domain.bounding_box();
    let n = op.dim_from();
    let (mut skipped, mut unbounded) = (0, 0);
    let mut max_ratio = 0.0f64;
    for i in 0..sample_count {
        let field = if i % 2 == 0 {
            SampleField::Smooth(SmoothField::random(&mut rng, n, &lo, &hi))
        } else {
            SampleField::Indicator(MollifiedIndicator::random(&mut rng, n, &lo, &hi))
        };
        let u = GridFunction::from_fn(domain, n, |x, o| field.evaluate_into(x, o));
        let lhs = sobolev_lhs(domain, &u);
        let rhs = sobolev_rhs(op, domain, &u)?;
        if lhs <= ZERO_THRESHOLD {
            skipped += 1;
        } else if rhs <= ZERO_THRESHOLD * lhs {
            unbounded += 1;
        } else {
            max_ratio = max_ratio.max(lhs / rhs);
        }
    }
    let profile = MollifiedIndicator {
        center: vec![0.0; op.dim_space()],
        radius: 0.5,
        width: 0.125,
        value: (0..n).map(|i| 1.0 / (1.0 + i as f64)).collect(),
    };
    let dilation = sobolev_dilation_study(op, &profile, &[0.5, 1.0, 2.0], 128)?;
    Ok(SobolevReport {
        samples: sample_count,
        skipped,
        unbounded,
        max_ratio,
        h: domain.h(),
        seed,
        cancelling,
        dilation,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub radius: f64,
    pub h: f64,
    pub constant: f64,
    pub ratio: f64,
    pub eigen_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingStudy {
    pub rows: Vec<ScalingRow>,
    pub mean_ratio: f64,
    pub max_deviation: f64,
    pub tolerance: f64,
}

impl ScalingStudy {
    pub fn passed(&self) -> bool {
        self.max_deviation <= self.tolerance
    }
}

/// `C(B_r, partial B_r) / r` over the given radii, each ball resolved with
/// `h = r / cells_per_radius`.
pub fn scaling_study(
    op: &Operator,
    radii: &[f64],
    cells_per_radius: usize,
) -> Result<ScalingStudy> {
    if radii.is_empty() || cells_per_radius == 0 {
        return Err(Error::InvalidInput(
            "scaling study needs radii and a resolution".into(),
        ));
    }
    let center = vec![0.0; op.dim_space()];
    let mut rows = Vec::new();
    for &r in radii {
        let h = r / cells_per_radius as f64;
        let dom = VoxelDomain::build_ball(&center, r, h)?;
        let gamma = full_boundary(&dom)?;
        let est = poincare_constant_p2(op, &dom, Constraint::Trace(gamma))?;
        rows.push(ScalingRow {
            radius: r,
            h,
            constant: est.value,
            ratio: est.value / r,
            eigen_residual: est.eigen.map_or(f64::NAN, |e| e.residual),
        });
    }
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    Ok(ScalingStudy {
        mean_ratio: ratios.iter().sum::<f64>() / ratios.len() as f64,
        max_deviation: max_relative_deviation(&ratios),
        rows,
        tolerance: 0.02,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CounterexampleReport {
    pub normal: Vec<f64>,
    pub direction: Vec<f64>,
    pub h: f64,
    /// `sum h^d |A_h f|` over cells whose neighbors are all in the domain.
    pub interior_variation: f64,
    pub total_variation: f64,
    /// `|f - Pi_Gamma tr f|_{L^1(Omega)}`.
    pub l1_distance: f64,
    /// Coefficients of `Pi_Gamma tr f`.
    pub projection_coefficients: Vec<f64>,
    pub gamma_facets: usize,
    pub gram_rank: usize,
    pub kernel_warning: Option<String>,
}

/// Builds `(Gamma, f)` from a real ellipticity failure and measures both
/// sides of the trace Poincaré inequality on `domain`.
///
/// The trace of the polynomial `f` is its exact value at the facet centers.
/// `Pi_Gamma` uses the kernel basis up to the default degree cap, which for
/// such operators is not stabilized; only its restriction to `Gamma` matters.
pub fn counterexample_blowup(op: &Operator, domain: &VoxelDomain) -> Result<CounterexampleReport> {
    let cert = check_ellipticity(op, Field::Real, 1e-8, SearchParams::default())?;
    if cert.is_elliptic() {
        return Err(Error::Precondition(alloc::format!(
            "operator {} is R-elliptic (sphere minimum {:e})",
            op.label(),
            cert.min_singular
        )));
    }
    let ce = hyperplane_counterexample(op, &cert)?;
    let omega = Shape::HalfSpace {
        normal: ce.normal.iter().map(|v| -v).collect(),
        offset: -ce.offset,
    };
    let gamma = select_hypersurface(domain, &omega, Side::Inside)?;
    let f = GridFunction::from_polynomial(domain, &ce.field)?;
    let af = apply_discrete(op, domain, &f)?;
    let vol = domain.cell_volume();
    let interior_variation = (0..domain.num_cells())
        .filter(|&c| domain.is_interior(c))
        .map(|c| vol * norm(af.at(c)))
        .sum();
    let total_variation = cell_lp_norm(domain, &af, 1.0);
    let kernel = kernel_basis(op, DEFAULT_DEGREE_CAP);
    let mu: DiscreteMeasure = gamma.measure()?;
    let pi = build_projection(&kernel, &mu)?;
    let proj = pi.project(&mu.sample(&ce.field))?;
    let q = GridFunction::from_polynomial(domain, &proj.field)?;
    let l1_distance = cell_lp_norm(domain, &f.add_scaled(&q, -1.0)?, 1.0);
    Ok(CounterexampleReport {
        normal: ce.normal,
        direction: ce.direction,
        h: domain.h(),
        interior_variation,
        total_variation,
        l1_distance,
        projection_coefficients: proj.coefficients,
        gamma_facets: gamma.facets.len(),
        gram_rank: pi.gram_rank(),
        kernel_warning: kernel.warning,
    })
}
