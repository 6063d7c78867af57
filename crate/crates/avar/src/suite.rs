//! Acceptance batteries. Each suite returns one entry per criterion with the
//! measured values; no timings are recorded so reruns are byte-identical.

use avar_core::domain::{Shape, Side, VoxelDomain};
use avar_core::ellipticity::{
    check_cancelling, check_ellipticity, Field, FieldVector, SearchParams,
};
use avar_core::grid::{boundary_term, extend_by_zero, GridFunction};
use avar_core::inequality::{
    counterexample_blowup, full_boundary, poincare_constant_p2, scaling_study,
    sobolev_trace_verify, Constraint, PoincareProblem,
};
use avar_core::nullspace::kernel_basis;
use avar_core::operator::{gradient, symmetric_gradient};
use avar_core::polynomial::apply_operator_to_polynomial;
use avar_core::projection::{build_projection, DiscreteMeasure};
use avar_core::sampling::SmoothField;
use avar_core::{Error, Operator};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::catalog;
use crate::report::ScalingJson;

pub const SUITES: [&str; 8] = [
    "catalog",
    "projection",
    "convergence",
    "scaling",
    "verification",
    "extension",
    "sobolev",
    "counterexample",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Measurement {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Criterion {
    pub id: u32,
    pub title: &'static str,
    pub passed: bool,
    pub measurements: Vec<Measurement>,
    pub failures: Vec<String>,
}

impl Criterion {
    fn new(id: u32, title: &'static str) -> Self {
        Self {
            id,
            title,
            passed: true,
            measurements: Vec::new(),
            failures: Vec::new(),
        }
    }

    fn measure(&mut self, name: impl Into<String>, value: f64) {
        self.measurements.push(Measurement {
            name: name.into(),
            value,
        });
    }

    /// Records `value` and fails the criterion unless `ok`.
    fn check(&mut self, name: impl Into<String>, value: f64, ok: bool) {
        let name = name.into();
        if !ok {
            self.passed = false;
            self.failures.push(format!("{name} = {value:e}"));
        }
        self.measure(name, value);
    }

    fn fail(&mut self, message: String) {
        self.passed = false;
        self.failures.push(message);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub passed: bool,
    pub criteria: Vec<Criterion>,
    /// Tabular output of the convergence and scaling suites.
    pub tables: Vec<SuiteTable>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteTable {
    pub name: String,
    pub headers: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

/// Criterion ids covered by each suite.
pub fn suite_criteria(name: &str) -> Option<&'static [u32]> {
    Some(match name {
        "catalog" => &[1, 2],
        "projection" => &[3],
        "convergence" => &[4],
        "scaling" => &[5],
        "verification" => &[6],
        "extension" => &[7],
        "sobolev" => &[8],
        "counterexample" => &[9],
        _ => return None,
    })
}

/// Runs one criterion; `tables` receives any tabular output.
pub fn run_criterion(id: u32, seed: u64, tables: &mut Vec<SuiteTable>) -> Option<Criterion> {
    Some(match id {
        1 => ellipticity_catalog(),
        2 => kernel_dimensions(),
        3 => projection_properties(seed),
        4 => {
            let (c, t) = poincare_convergence();
            tables.extend(t);
            c
        }
        5 => {
            let (c, t) = scaling_checks();
            tables.extend(t);
            c
        }
        6 => inequality_verification(seed),
        7 => extension_identity(seed),
        8 => sobolev_suite(seed),
        9 => counterexample_suite(),
        _ => return None,
    })
}

pub fn run_suite(name: &str, seed: u64) -> Result<SuiteReport, String> {
    if name.is_empty() {
        return Err("empty suite name".into());
    }
    let ids = suite_criteria(name).ok_or_else(|| {
        format!(
            "unknown suite {name:?}; expected one of {}",
            SUITES.join(", ")
        )
    })?;
    let mut tables = Vec::new();
    let criteria: Vec<Criterion> = ids
        .iter()
        .map(|&id| run_criterion(id, seed, &mut tables).expect("known criterion"))
        .collect();
    Ok(SuiteReport {
        suite: name.to_string(),
        seed,
        passed: criteria.iter().all(|c| c.passed),
        criteria,
        tables,
    })
}

fn unit_square(h: f64) -> VoxelDomain {
    VoxelDomain::build_box(&[0.0, 0.0], &[1.0, 1.0], h).expect("unit square")
}

fn interval(h: f64) -> VoxelDomain {
    VoxelDomain::build_box(&[0.0], &[1.0], h).expect("unit interval")
}

fn all_cells(d: &VoxelDomain) -> Constraint {
    Constraint::Subset((0..d.num_cells()).collect())
}

fn left_end(d: &VoxelDomain) -> Constraint {
    let omega = Shape::HalfSpace {
        normal: vec![1.0],
        offset: 0.0,
    };
    Constraint::Trace(
        avar_core::domain::select_hypersurface(d, &omega, Side::Outside).expect("left end"),
    )
}

/// Distance of the unit vector `xi` from the complex line through `(1, i)`.
fn distance_from_line(xi: &FieldVector) -> f64 {
    let z = xi.to_complex();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    // <xi, e> with e = (1, i)/sqrt 2.
    let (re, im) = (s * (z[0].re + z[1].im), s * (z[0].im - z[1].re));
    let proj2 = re * re + im * im;
    (xi.norm().powi(2) - proj2).max(0.0).sqrt()
}

fn ellipticity_catalog() -> Criterion {
    let mut c = Criterion::new(1, "ellipticity catalog");
    let mut correct = 0usize;
    let entries = catalog::entries();
    for e in &entries {
        let mut ok = true;
        for (field, expected) in [
            (Field::Real, e.expected.real_elliptic.value),
            (Field::Complex, e.expected.complex_elliptic.value),
        ] {
            let cert = match check_ellipticity(&e.operator, field, 1e-8, SearchParams::default()) {
                Ok(cert) => cert,
                Err(err) => {
                    c.fail(format!("{}: {err}", e.name));
                    ok = false;
                    continue;
                }
            };
            let tag = format!("{}.{}", e.name, crate::report::field_name(field));
            c.measure(format!("{tag}.min_singular"), cert.min_singular);
            if cert.is_elliptic() != expected {
                c.fail(format!(
                    "{tag}: verdict elliptic={} expected {}",
                    cert.is_elliptic(),
                    expected
                ));
                ok = false;
            }
            if let Some(w) = &cert.witness {
                c.check(
                    format!("{tag}.witness_residual"),
                    w.residual,
                    w.residual <= 1e-8,
                );
                ok &= w.residual <= 1e-8;
                if e.name == "cauchy_riemann" && field == Field::Complex {
                    let dist = distance_from_line(&w.xi);
                    c.check(
                        "cauchy_riemann.witness_distance_from_(1,i)",
                        dist,
                        dist <= 1e-6,
                    );
                    ok &= dist <= 1e-6;
                }
            }
        }
        correct += usize::from(ok);
    }
    c.check(
        "operators_classified",
        correct as f64,
        correct == entries.len(),
    );
    c.measure("catalog_size", entries.len() as f64);
    c
}

fn kernel_dimensions() -> Criterion {
    let mut c = Criterion::new(2, "kernel dimensions");
    let cases: [(Operator, usize); 6] = [
        (gradient(1, 1), 1),
        (gradient(2, 1), 1),
        (gradient(2, 3), 3),
        (gradient(3, 2), 2),
        (symmetric_gradient(2), 3),
        (symmetric_gradient(3), 6),
    ];
    for (op, expected) in cases {
        let name = format!("{}_N{}", op.label(), op.dim_from());
        let k = kernel_basis(&op, 3);
        c.check(
            format!("{name}.dimension"),
            k.dimension() as f64,
            k.dimension() == expected,
        );
        c.check(
            format!("{name}.stabilized_by_3"),
            f64::from(u8::from(k.stabilized)),
            k.stabilized,
        );
        let worst = k
            .elements
            .iter()
            .map(|p| {
                apply_operator_to_polynomial(&op, p)
                    .map(|ap| ap.max_abs_coefficient())
                    .unwrap_or(f64::INFINITY)
            })
            .fold(0.0, f64::max);
        c.check(format!("{name}.max_residual"), worst, worst <= 1e-10);
    }
    c
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn projection_properties(seed: u64) -> Criterion {
    const TOL: f64 = 1e-10;
    const FIELDS: usize = 100;
    let mut c = Criterion::new(3, "projection properties");
    let dom = unit_square(1.0 / 32.0);
    let mu = dom.volume_measure(None).expect("volume measure");
    for op in [gradient(2, 1), symmetric_gradient(2)] {
        let n = op.dim_from();
        let kernel = kernel_basis(&op, 3);
        let pi = match build_projection(&kernel, &mu) {
            Ok(p) => p,
            Err(e) => {
                c.fail(format!("{}: {e}", op.label()));
                continue;
            }
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (lo, hi) = dom.bounding_box();
        let sample = |f: &SmoothField, mu: &DiscreteMeasure| -> Vec<f64> {
            let mut out = vec![0.0; mu.len() * n];
            for (x, o) in mu.points().iter().zip(out.chunks_mut(n)) {
                f.evaluate_into(x, o);
            }
            out
        };
        let nrm = |a: &[f64]| mu.inner(n, a, a).sqrt();
        let diff =
            |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x - y).collect() };
        let mut worst = [0.0f64; 5];
        for _ in 0..FIELDS {
            let u = sample(&SmoothField::random(&mut rng, n, &lo, &hi), &mu);
            let v = sample(&SmoothField::random(&mut rng, n, &lo, &hi), &mu);
            let pu = pi.project_values(&u).expect("sizes match");
            let pv = pi.project_values(&v).expect("sizes match");
            let (nu, nv) = (nrm(&u), nrm(&v));
            let ppu = pi.project_values(&pu).expect("sizes match");
            worst[0] = worst[0].max(nrm(&diff(&ppu, &pu)) / nu);
            let sym = (mu.inner(n, &pu, &v) - mu.inner(n, &u, &pv)).abs();
            worst[1] = worst[1].max(sym / (nu * nv));
            worst[2] = worst[2].max((nrm(&pu) - nu) / nu);
            let mut q = vec![0.0; u.len()];
            for p in &kernel.elements {
                let a = normal(&mut rng);
                for (qi, s) in q.iter_mut().zip(mu.sample(p)) {
                    *qi += a * s;
                }
            }
            let pq = pi.project_values(&q).expect("sizes match");
            worst[3] = worst[3].max(nrm(&diff(&pq, &q)) / nrm(&q));
            let s = normal(&mut rng);
            let su: Vec<f64> = u.iter().map(|x| s * x).collect();
            let psu = pi.project_values(&su).expect("sizes match");
            let spu: Vec<f64> = pu.iter().map(|x| s * x).collect();
            worst[4] = worst[4].max(nrm(&diff(&psu, &spu)) / (s.abs() * nu));
        }
        let names = [
            "idempotence",
            "self_adjointness",
            "l2_contraction",
            "kernel_reproduction",
            "homogeneity",
        ];
        for (name, w) in names.iter().zip(worst) {
            c.check(format!("{}.{name}", op.label()), w, w <= TOL);
        }
    }
    c.measure("fields_per_operator", FIELDS as f64);
    c
}

fn relative_error(value: f64, exact: f64) -> f64 {
    (value - exact).abs() / exact
}

fn poincare_convergence() -> (Criterion, Vec<SuiteTable>) {
    let mut c = Criterion::new(4, "Poincaré p=2 convergence");
    let pi = std::f64::consts::PI;
    type Case = (
        &'static str,
        Operator,
        fn(f64) -> VoxelDomain,
        fn(&VoxelDomain) -> Constraint,
        f64,
    );
    let cases: [Case; 3] = [
        (
            "interval_subset",
            gradient(1, 1),
            interval,
            all_cells,
            1.0 / pi,
        ),
        (
            "interval_trace_left",
            gradient(1, 1),
            interval,
            left_end,
            2.0 / pi,
        ),
        (
            "square_subset",
            gradient(2, 1),
            unit_square,
            all_cells,
            1.0 / pi,
        ),
    ];
    let mut table = SuiteTable {
        name: "convergence".into(),
        headers: vec![
            "case",
            "h",
            "constant",
            "exact",
            "relative_error",
            "eigen_residual",
        ],
        rows: Vec::new(),
    };
    for (case, (name, op, build, constraint, exact)) in cases.into_iter().enumerate() {
        let mut errors = Vec::new();
        for m in [6, 7] {
            let h = 0.5f64.powi(m);
            let dom = build(h);
            match poincare_constant_p2(&op, &dom, constraint(&dom)) {
                Ok(est) => {
                    let err = relative_error(est.value, exact);
                    let eig = est.eigen.expect("eigenproblem estimate");
                    table
                        .rows
                        .push(vec![case as f64, h, est.value, exact, err, eig.residual]);
                    c.check(
                        format!("{name}.h=2^-{m}.eigen_residual"),
                        eig.residual,
                        eig.residual <= 1e-8,
                    );
                    c.check(
                        format!("{name}.h=2^-{m}.constraint_residual"),
                        eig.constraint_residual,
                        eig.constraint_residual <= 1e-8,
                    );
                    c.measure(format!("{name}.h=2^-{m}.constant"), est.value);
                    errors.push(err);
                }
                Err(e) => c.fail(format!("{name} at h=2^-{m}: {e}")),
            }
        }
        if let [coarse, fine] = errors[..] {
            c.check(format!("{name}.relative_error"), fine, fine <= 0.01);
            c.check(
                format!("{name}.error_ratio_h/2"),
                fine / coarse,
                fine < coarse,
            );
        }
    }
    (c, vec![table])
}

fn scaling_checks() -> (Criterion, Vec<SuiteTable>) {
    let mut c = Criterion::new(5, "scaling with radius");
    let mut tables = Vec::new();
    let radii = [0.5, 1.0, 2.0];
    for op in [gradient(2, 1), symmetric_gradient(2)] {
        match scaling_study(&op, &radii, 32) {
            Ok(study) => {
                let j = ScalingJson::from(&study);
                c.check(
                    format!("{}.max_deviation", op.label()),
                    study.max_deviation,
                    study.passed(),
                );
                c.measure(format!("{}.mean_ratio", op.label()), study.mean_ratio);
                let direct = VoxelDomain::build_ball(&[0.0, 0.0], 1.0, 1.0 / 32.0)
                    .and_then(|d| {
                        let g = full_boundary(&d)?;
                        poincare_constant_p2(&op, &d, Constraint::Trace(g))
                    })
                    .map(|e| e.value);
                match direct {
                    Ok(v) => {
                        let gap = relative_error(study.rows[1].constant, v);
                        c.check(
                            format!("{}.unit_ball_identity", op.label()),
                            gap,
                            gap <= 1e-12,
                        );
                    }
                    Err(e) => c.fail(format!("{}: {e}", op.label())),
                }
                let t = j.table();
                tables.push(SuiteTable {
                    name: format!("scaling_{}", op.label()),
                    headers: t.headers,
                    rows: t.rows,
                });
            }
            Err(e) => c.fail(format!("{}: {e}", op.label())),
        }
    }
    (c, tables)
}

fn inequality_verification(seed: u64) -> Criterion {
    let mut c = Criterion::new(6, "inequality verification");
    let h = 1.0 / 64.0;
    let dom = unit_square(h);
    let slice = Shape::HalfSpace {
        normal: vec![1.0, 0.0],
        offset: 0.5,
    };
    for op in [gradient(2, 1), symmetric_gradient(2)] {
        let mut constraints = vec![
            ("subset_all", all_cells(&dom)),
            (
                "subset_lower_left",
                Constraint::Subset(dom.cells_in(&Shape::Box {
                    lo: vec![0.0, 0.0],
                    hi: vec![0.5, 0.5],
                })),
            ),
            (
                "trace_boundary",
                Constraint::Trace(full_boundary(&dom).expect("boundary")),
            ),
        ];
        for (label, side) in [
            ("trace_slice_inside", Side::Inside),
            ("trace_slice_outside", Side::Outside),
        ] {
            let g = avar_core::domain::select_hypersurface(&dom, &slice, side).expect("slice");
            constraints.push((label, Constraint::Trace(g)));
        }
        for (label, constraint) in constraints {
            let name = format!("{}.{label}", op.label());
            let result = PoincareProblem::new(&op, &dom, constraint).and_then(|p| {
                let est = p.poincare_constant_p2()?;
                let rep = p.verify(&est, 200, seed)?;
                Ok((est, rep))
            });
            match result {
                Ok((est, rep)) => {
                    c.measure(format!("{name}.constant"), est.value);
                    c.measure(format!("{name}.worst_ratio"), rep.worst_ratio);
                    c.check(
                        format!("{name}.violations"),
                        rep.violations as f64,
                        rep.violations == 0,
                    );
                }
                Err(e) => c.fail(format!("{name}: {e}")),
            }
        }
    }
    c.measure("samples", 200.0);
    c.measure("tol_rel", 10.0 * h);
    c
}

fn extension_identity(seed: u64) -> Criterion {
    let mut c = Criterion::new(7, "extension by zero");
    let dom = unit_square(1.0 / 64.0);
    let (lo, hi) = dom.bounding_box();
    for op in [gradient(2, 1), symmetric_gradient(2)] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let f = SmoothField::random(&mut rng, op.dim_from(), &lo, &hi);
            let u = GridFunction::from_fn(&dom, op.dim_from(), |x, o| f.evaluate_into(x, o));
            match extend_by_zero(&op, &dom, &u, 2) {
                Ok((_, _, rep)) => worst = worst.max(rep.relative_defect()),
                Err(e) => {
                    c.fail(format!("{}: {e}", op.label()));
                    break;
                }
            }
        }
        c.check(
            format!("{}.worst_relative_defect", op.label()),
            worst,
            worst <= 0.05,
        );
    }
    let one = GridFunction::from_fn(&dom, 1, |_, o| o[0] = 1.0);
    match boundary_term(&gradient(2, 1), &dom, &one) {
        Ok(b) => c.check(
            "gradient2d.constant_boundary_term",
            b,
            relative_error(b, 4.0) <= 0.02,
        ),
        Err(e) => c.fail(format!("boundary term: {e}")),
    }
    c
}

fn sobolev_suite(seed: u64) -> Criterion {
    let mut c = Criterion::new(8, "Sobolev trace inequality");
    let isoperimetric = 1.0 / (2.0 * std::f64::consts::PI.sqrt());
    for op in [gradient(2, 1), symmetric_gradient(2)] {
        let mut max_ratios = Vec::new();
        for h in [1.0 / 32.0, 1.0 / 64.0] {
            let disk = VoxelDomain::build_ball(&[0.0, 0.0], 1.0, h).expect("unit disk");
            match sobolev_trace_verify(&op, &disk, 100, seed) {
                Ok(r) => {
                    max_ratios.push(r.max_ratio);
                    if h == 1.0 / 64.0 {
                        c.check(
                            format!("{}.unbounded", op.label()),
                            r.unbounded as f64,
                            r.unbounded == 0,
                        );
                        c.check(
                            format!("{}.max_ratio", op.label()),
                            r.max_ratio,
                            r.max_ratio.is_finite(),
                        );
                        c.check(
                            format!("{}.dilation_deviation", op.label()),
                            r.dilation.max_deviation,
                            r.dilation.max_deviation <= 0.02,
                        );
                        if op.label() == "gradient2d" {
                            c.check(
                                "gradient2d.max_ratio_vs_isoperimetric",
                                r.max_ratio / isoperimetric,
                                r.max_ratio <= isoperimetric * (1.0 + 10.0 * h),
                            );
                        }
                    }
                }
                Err(e) => c.fail(format!("{}: {e}", op.label())),
            }
        }
        if let [coarse, fine] = max_ratios[..] {
            c.check(
                format!("{}.max_ratio_growth_h/2", op.label()),
                fine / coarse,
                fine <= 1.1 * coarse,
            );
        }
    }
    for op in [gradient(2, 1), symmetric_gradient(2), symmetric_gradient(3)] {
        match check_cancelling(&op, 64, 1e-8, seed) {
            Ok(cert) => c.check(
                format!("{}.cancelling", op.label()),
                cert.residual_dim as f64,
                cert.is_cancelling(),
            ),
            Err(e) => c.fail(format!("{}: {e}", op.label())),
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut one_dim = vec![gradient(1, 1), gradient(1, 3)];
    for _ in 0..8 {
        let (n, k) = (rng.random_range(1..4usize), rng.random_range(1..4usize));
        let rows: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..n).map(|_| normal(&mut rng)).collect())
            .collect();
        one_dim.push(
            Operator::from_row_major(Some("random1d"), 1, n, k, &[rows]).expect("random operator"),
        );
    }
    let mut refused = 0usize;
    for op in &one_dim {
        let cert = check_cancelling(op, 64, 1e-8, seed);
        let dom = VoxelDomain::build_box(&[0.0], &[1.0], 1.0 / 16.0).expect("interval");
        let sob = sobolev_trace_verify(op, &dom, 1, seed);
        if matches!(cert, Ok(ref cert) if !cert.is_cancelling())
            && matches!(sob, Err(Error::Precondition(_)))
        {
            refused += 1;
        }
    }
    c.check(
        "one_dimensional_not_cancelling",
        refused as f64,
        refused == one_dim.len(),
    );
    c
}

fn counterexample_suite() -> Criterion {
    let mut c = Criterion::new(9, "counterexample blow-up");
    let op = catalog::lookup("dx_only").expect("catalog").operator;
    let mut l1 = Vec::new();
    for m in [6, 7] {
        let dom = unit_square(0.5f64.powi(m));
        match counterexample_blowup(&op, &dom) {
            Ok(r) => {
                c.check(
                    format!("h=2^-{m}.interior_variation"),
                    r.interior_variation,
                    r.interior_variation == 0.0,
                );
                c.check(
                    format!("h=2^-{m}.total_variation"),
                    r.total_variation,
                    r.total_variation <= 10.0 * r.h,
                );
                c.check(
                    format!("h=2^-{m}.l1_distance"),
                    r.l1_distance,
                    r.l1_distance >= 0.4,
                );
                let pn = r
                    .projection_coefficients
                    .iter()
                    .map(|v| v * v)
                    .sum::<f64>()
                    .sqrt();
                c.measure(format!("h=2^-{m}.projection_norm"), pn);
                l1.push(r.l1_distance);
            }
            Err(e) => c.fail(format!("h=2^-{m}: {e}")),
        }
    }
    if let [coarse, fine] = l1[..] {
        let change = relative_error(fine, coarse);
        c.check("l1_refinement_change", change, change <= 0.01);
    }
    c
}
