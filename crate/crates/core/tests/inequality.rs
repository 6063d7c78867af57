use avar_core::domain::{select_hypersurface, Shape, Side, VoxelDomain};
use avar_core::grid::{discrete_operator, GridFunction};
use avar_core::inequality::{
    counterexample_blowup, full_boundary, poincare_constant_p2, poincare_l1_lower_bound,
    scaling_study, sobolev_dilation_study, sobolev_lhs, sobolev_rhs, sobolev_trace_verify,
    verify_inequality, Constraint, Method, PoincareProblem,
};
use avar_core::nullspace::kernel_basis;
use avar_core::operator::{gradient, partial_x_only, symmetric_gradient};
use avar_core::sampling::{MollifiedIndicator, SmoothField};
use avar_core::{Error, Operator};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn interval(h: f64) -> VoxelDomain {
    VoxelDomain::build_box(&[0.0], &[1.0], h).unwrap()
}

fn square(h: f64) -> VoxelDomain {
    VoxelDomain::build_box(&[0.0, 0.0], &[1.0, 1.0], h).unwrap()
}

fn everything(d: &VoxelDomain) -> Constraint {
    Constraint::Subset((0..d.num_cells()).collect())
}

fn left_end(d: &VoxelDomain) -> Constraint {
    let omega = Shape::HalfSpace {
        normal: vec![1.0],
        offset: 0.0,
    };
    Constraint::Trace(select_hypersurface(d, &omega, Side::Outside).unwrap())
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// One-sided at the ends, central inside: the matrix of `d/dx` on `n` cells.
fn dense_difference(n: usize, h: f64) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(n, n);
    a[(0, 0)] = -1.0 / h;
    a[(0, 1)] = 1.0 / h;
    a[(n - 1, n - 2)] = -1.0 / h;
    a[(n - 1, n - 1)] = 1.0 / h;
    for i in 1..n - 1 {
        a[(i, i - 1)] = -0.5 / h;
        a[(i, i + 1)] = 0.5 / h;
    }
    a
}

/// Smallest eigenvalue of `k` restricted to the orthogonal complement of
/// `rows`, through an explicit orthonormal basis of that complement.
fn dense_constrained_lambda(k: &DMatrix<f64>, rows: &[Vec<f64>]) -> f64 {
    let n = k.nrows();
    let c = DMatrix::from_fn(n, rows.len(), |i, j| rows[j][i]);
    let q = c.columns(0, rows.len()).into_owned().qr().q();
    let full = DMatrix::from_fn(n, n, |i, j| {
        if j < rows.len() {
            q[(i, j)]
        } else if i == j {
            1.0
        } else {
            0.0
        }
    });
    let basis = full.qr().q();
    let z = basis.columns(rows.len(), n - rows.len()).into_owned();
    (z.transpose() * k * &z).symmetric_eigenvalues().min()
}

/// Smallest eigenvalue of `A^T A` on mean-zero vectors.
fn dense_neumann_lambda(n: usize) -> f64 {
    let a = dense_difference(n, 1.0 / n as f64);
    dense_constrained_lambda(&(a.transpose() * &a), &[vec![1.0; n]])
}

/// Smallest eigenvalue of `A^T A` with the first cell pinned to zero.
fn dense_pinned_lambda(n: usize) -> f64 {
    let a = dense_difference(n, 1.0 / n as f64);
    let k = a.transpose() * &a;
    k.view((1, 1), (n - 1, n - 1))
        .into_owned()
        .symmetric_eigenvalues()
        .min()
}

#[test]
fn interval_constants_match_dense_eigensolves() {
    for n in [32usize, 64, 100] {
        let d = interval(1.0 / n as f64);
        let neumann = poincare_constant_p2(&gradient(1, 1), &d, everything(&d)).unwrap();
        assert!(
            relative(neumann.value, dense_neumann_lambda(n).powf(-0.5)) < 1e-9,
            "{n}: {} vs {}",
            neumann.value,
            dense_neumann_lambda(n).powf(-0.5)
        );
        let pinned = poincare_constant_p2(&gradient(1, 1), &d, left_end(&d)).unwrap();
        assert!(relative(pinned.value, dense_pinned_lambda(n).powf(-0.5)) < 1e-9);
    }
}

#[test]
fn square_constant_equals_interval_constant() {
    // The 2D pencil is a Kronecker sum of 1D pencils.
    let h = 1.0 / 32.0;
    let one =
        poincare_constant_p2(&gradient(1, 1), &interval(h), everything(&interval(h))).unwrap();
    let two = poincare_constant_p2(&gradient(2, 1), &square(h), everything(&square(h))).unwrap();
    assert!(relative(two.value, one.value) < 1e-8);
}

#[test]
fn analytic_constants_are_approached() {
    let mut previous = [f64::INFINITY; 2];
    for h in [1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0] {
        let d = interval(h);
        let errors = [
            relative(
                poincare_constant_p2(&gradient(1, 1), &d, everything(&d))
                    .unwrap()
                    .value,
                1.0 / PI,
            ),
            relative(
                poincare_constant_p2(&gradient(1, 1), &d, left_end(&d))
                    .unwrap()
                    .value,
                2.0 / PI,
            ),
        ];
        for (e, p) in errors.iter().zip(&previous) {
            assert!(e < p);
        }
        previous = errors;
    }
    assert!(previous.iter().all(|e| *e <= 0.01));
}

fn pinned_residual(op: &Operator, problem: &PoincareProblem, lambda: f64, u: &[f64]) -> f64 {
    let k = discrete_operator(op, problem.domain()).unwrap().gram();
    let mut r = k.mul_vec(u);
    r.iter_mut().zip(u).for_each(|(ri, ui)| *ri -= lambda * ui);
    for c in problem.constraint_rows() {
        let t: f64 = c.iter().zip(&r).map(|(a, b)| a * b).sum();
        r.iter_mut().zip(&c).for_each(|(ri, ci)| *ri -= t * ci);
    }
    let nr = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nu = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    nr / nu
}

#[test]
fn stored_eigenpairs_satisfy_their_residuals() {
    let d = square(1.0 / 16.0);
    let cases = [
        (symmetric_gradient(2), everything(&d)),
        (
            symmetric_gradient(2),
            Constraint::Trace(full_boundary(&d).unwrap()),
        ),
        (
            gradient(2, 2),
            Constraint::Subset(d.cells_in(&Shape::Ball {
                center: vec![0.3, 0.3],
                radius: 0.2,
            })),
        ),
    ];
    for (op, constraint) in cases {
        let problem = PoincareProblem::new(&op, &d, constraint).unwrap();
        let est = problem.poincare_constant_p2().unwrap();
        let eigen = est.eigen.unwrap();
        let u = est.eigenvector.unwrap();
        assert!(eigen.residual <= 1e-8);
        assert!(eigen.constraint_residual <= 1e-8);
        assert!(pinned_residual(&op, &problem, eigen.lambda, &u) <= 1e-8);
        let uf = GridFunction::new(avar_core::grid::GridKind::Cell, op.dim_from(), u).unwrap();
        let c = problem.projection_coefficients(&uf).unwrap();
        assert!(c.iter().map(|v| v * v).sum::<f64>().sqrt() <= 1e-8);
        assert_eq!(est.method, Method::Eigenproblem);
        assert!((est.value - eigen.lambda.powf(-0.5)).abs() < 1e-15 * est.value.max(1.0) * 10.0);
    }
}

fn dense_subset_constant(op: &Operator, d: &VoxelDomain, cells: &[usize]) -> f64 {
    let a = discrete_operator(op, d).unwrap();
    let dense = DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| {
        a.row(i).find(|(c, _)| *c == j).map_or(0.0, |(_, v)| v)
    });
    let n = op.dim_from();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut r = vec![0.0; d.num_cells() * n];
            cells.iter().for_each(|&c| r[c * n + i] = 1.0);
            r
        })
        .collect();
    dense_constrained_lambda(&(dense.transpose() * &dense), &rows).powf(-0.5)
}

#[test]
fn nested_subsets_can_increase_the_constant() {
    // Enlarging E changes the constraint subspace instead of shrinking it,
    // so only E' = Omega is guaranteed to give the smallest constant.
    let d = square(1.0 / 16.0);
    let op = gradient(2, 1);
    let inner = d.cells_in(&Shape::Box {
        lo: vec![0.25, 0.25],
        hi: vec![0.75, 0.75],
    });
    let outer = d.cells_in(&Shape::Box {
        lo: vec![0.125, 0.0],
        hi: vec![0.875, 0.875],
    });
    assert!(inner.iter().all(|c| outer.contains(c)));
    let c_inner = poincare_constant_p2(&op, &d, Constraint::Subset(inner.clone()))
        .unwrap()
        .value;
    let c_outer = poincare_constant_p2(&op, &d, Constraint::Subset(outer.clone()))
        .unwrap()
        .value;
    assert!(relative(c_inner, dense_subset_constant(&op, &d, &inner)) < 1e-9);
    assert!(relative(c_outer, dense_subset_constant(&op, &d, &outer)) < 1e-9);
    assert!(c_outer > c_inner * 1.01);
    let whole = poincare_constant_p2(&op, &d, everything(&d)).unwrap().value;
    assert!(whole <= c_inner * (1.0 + 1e-12) && whole <= c_outer);
}

#[test]
fn l1_ratio_of_a_linear_function() {
    let d = interval(1.0 / 64.0);
    let problem = PoincareProblem::new(&gradient(1, 1), &d, everything(&d)).unwrap();
    let u = GridFunction::from_fn(&d, 1, |x, o| o[0] = x[0]);
    assert!((problem.ratio(&u, 1.0).unwrap().unwrap() - 0.25).abs() < 1e-12);
}

#[test]
fn l1_lower_bound_stays_below_the_sharp_constant() {
    let h = 1.0 / 64.0;
    let d = interval(h);
    let est = poincare_l1_lower_bound(&gradient(1, 1), &d, everything(&d), 200, 42).unwrap();
    assert_eq!(est.method, Method::SampleMax);
    assert!(est.value > 0.0 && est.value <= 0.5 + h);
}

#[test]
fn kernel_samples_are_skipped() {
    let d = square(1.0 / 16.0);
    let op = symmetric_gradient(2);
    let problem = PoincareProblem::new(&op, &d, everything(&d)).unwrap();
    for e in &kernel_basis(&op, 8).elements {
        let u = GridFunction::from_polynomial(&d, e).unwrap();
        assert_eq!(problem.ratio(&u, 2.0).unwrap(), None);
    }
}

#[test]
fn verification_semantics() {
    let d = square(1.0 / 32.0);
    let op = symmetric_gradient(2);
    let problem = PoincareProblem::new(&op, &d, everything(&d)).unwrap();
    let eigen = problem.poincare_constant_p2().unwrap();
    assert_eq!(
        verify_inequality(&problem, &eigen, 200, 42)
            .unwrap()
            .violations,
        0
    );

    let sampled = problem.l1_lower_bound(50, 7).unwrap();
    let same = verify_inequality(&problem, &sampled, 50, 7).unwrap();
    assert_eq!(same.violations, 0);
    assert!((same.worst_ratio - sampled.value).abs() <= 1e-15 * sampled.value);
    let fresh = verify_inequality(&problem, &sampled, 50, 8).unwrap();
    assert!(fresh.worst_ratio > 0.0 && fresh.tol_rel == 10.0 * d.h());
}

#[test]
fn hypotheses_are_checked() {
    let d = square(0.25);
    let empty = poincare_constant_p2(&gradient(2, 1), &d, Constraint::Subset(vec![]));
    assert!(empty.is_err());
    let not_elliptic = poincare_constant_p2(&partial_x_only(), &d, everything(&d));
    assert!(matches!(not_elliptic, Err(Error::Precondition(_))));
    let mask = Shape::Mask {
        origin: vec![0.0, 0.0],
        spacing: 0.25,
        dims: vec![3, 1],
        cells: vec![true, false, true],
    };
    let split = VoxelDomain::build_from_mask(mask, 0.25, false).unwrap();
    assert!(poincare_constant_p2(&gradient(2, 1), &split, everything(&split)).is_err());
    assert!(PoincareProblem::new(&gradient(1, 1), &d, everything(&d)).is_err());
}

#[test]
fn sobolev_sides_for_the_constant_function_on_a_disk() {
    for h in [1.0 / 32.0, 1.0 / 64.0] {
        let disk = VoxelDomain::build_ball(&[0.0, 0.0], 1.0, h).unwrap();
        let one = GridFunction::from_fn(&disk, 1, |_, o| o[0] = 1.0);
        let lhs = sobolev_lhs(&disk, &one);
        let rhs = sobolev_rhs(&gradient(2, 1), &disk, &one).unwrap();
        assert!((lhs - disk.volume().sqrt()).abs() < 1e-12);
        assert!((rhs - disk.perimeter()).abs() < 1e-9);
        // The staircase boundary of the unit disk has length 8, not 2 pi.
        assert!((disk.perimeter() - 8.0).abs() <= 8.0 * h);
        assert!((lhs / rhs - PI.sqrt() / 8.0).abs() <= h);
    }
}

#[test]
fn sobolev_dilations_are_invariant() {
    let profile = MollifiedIndicator {
        center: vec![0.0, 0.0],
        radius: 0.5,
        width: 0.125,
        value: vec![1.0, 0.5],
    };
    let study =
        sobolev_dilation_study(&symmetric_gradient(2), &profile, &[0.5, 1.0, 2.0], 32).unwrap();
    assert!(study.max_deviation <= 0.02);
    assert_eq!(study.rows.len(), 3);
}

#[test]
fn sobolev_needs_two_dimensions() {
    let d = interval(1.0 / 16.0);
    assert!(matches!(
        sobolev_trace_verify(&gradient(1, 1), &d, 4, 42),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn sobolev_gradient_ratio_is_finite() {
    let disk = VoxelDomain::build_ball(&[0.0, 0.0], 1.0, 1.0 / 16.0).unwrap();
    let r = sobolev_trace_verify(&gradient(2, 1), &disk, 20, 42).unwrap();
    assert_eq!(r.unbounded, 0);
    assert!(r.max_ratio.is_finite() && r.max_ratio > 0.0);
    assert!(r.cancelling.is_cancelling());
}

#[test]
fn constants_scale_linearly_with_radius() {
    for op in [gradient(2, 1), symmetric_gradient(2)] {
        let study = scaling_study(&op, &[0.5, 1.0, 2.0], 16).unwrap();
        assert!(study.passed(), "{}: {}", op.label(), study.max_deviation);
        let unit = VoxelDomain::build_ball(&[0.0, 0.0], 1.0, 1.0 / 16.0).unwrap();
        let direct =
            poincare_constant_p2(&op, &unit, Constraint::Trace(full_boundary(&unit).unwrap()))
                .unwrap();
        assert!(relative(study.rows[1].constant, direct.value) < 1e-12);
    }
}

#[test]
fn x_derivative_counterexample_has_no_constant() {
    let mut l1 = Vec::new();
    for h in [1.0 / 32.0, 1.0 / 64.0] {
        let r = counterexample_blowup(&partial_x_only(), &square(h)).unwrap();
        assert_eq!(r.interior_variation, 0.0);
        assert!(r.total_variation <= 10.0 * h);
        assert!(r.projection_coefficients.iter().all(|c| c.abs() < 1e-12));
        assert!(r.kernel_warning.is_some());
        // Midpoint sum of |x_2| over the unit square.
        let riemann: f64 = (0..(1.0 / h) as usize)
            .map(|j| h * (j as f64 + 0.5) * h)
            .sum::<f64>()
            / h
            * h;
        assert!((r.l1_distance - riemann).abs() < 1e-12);
        l1.push(r.l1_distance);
    }
    assert!(relative(l1[1], l1[0]) <= 0.01);
    assert!(counterexample_blowup(&gradient(2, 1), &square(0.25)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn ratios_are_one_homogeneous(seed in 0u64..10_000, c in prop_oneof![-50.0f64..-0.01, 0.01f64..50.0], p in 1.0f64..4.0) {
        let d = square(1.0 / 16.0);
        let op = symmetric_gradient(2);
        let problem = PoincareProblem::new(&op, &d, Constraint::Trace(full_boundary(&d).unwrap())).unwrap();
        let f = SmoothField::random(&mut ChaCha8Rng::seed_from_u64(seed), 2, &[0.0, 0.0], &[1.0, 1.0]);
        let u = GridFunction::from_fn(&d, 2, |x, o| f.evaluate_into(x, o));
        let a = problem.ratio(&u, p).unwrap().unwrap();
        let b = problem.ratio(&u.scaled(c), p).unwrap().unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a);
    }

    #[test]
    fn whole_domain_gives_the_smallest_constant(
        symmetric in any::<bool>(),
        lo in prop::array::uniform2(0.0f64..0.6),
        size in prop::array::uniform2(0.2f64..0.4),
    ) {
        let d = square(1.0 / 16.0);
        let op = if symmetric { symmetric_gradient(2) } else { gradient(2, 1) };
        let e = Shape::Box { lo: lo.to_vec(), hi: vec![lo[0] + size[0], lo[1] + size[1]] };
        let whole = poincare_constant_p2(&op, &d, everything(&d)).unwrap().value;
        let sub = poincare_constant_p2(&op, &d, Constraint::Subset(d.cells_in(&e))).unwrap().value;
        prop_assert!(whole <= sub * (1.0 + 1e-6), "{} > {}", whole, sub);
    }
}
