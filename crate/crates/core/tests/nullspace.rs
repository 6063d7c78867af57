use avar_core::ellipticity::{check_ellipticity, Field, SearchParams};
use avar_core::nullspace::{hyperplane_counterexample, kernel_basis, KernelBasis};
use avar_core::operator::{
    cauchy_riemann, divergence, gradient, partial_x_only, symmetric_gradient,
};
use avar_core::polynomial::{apply_operator_to_polynomial, PolynomialVectorField};
use avar_core::Operator;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn field(d: usize, n: usize, terms: &[(&[u32], usize, f64)]) -> PolynomialVectorField {
    PolynomialVectorField::from_terms(d, n, terms.iter().map(|(a, c, v)| (a.to_vec(), *c, *v)))
        .unwrap()
}

fn rotation() -> PolynomialVectorField {
    field(2, 2, &[(&[0, 1], 0, -1.0), (&[1, 0], 1, 1.0)])
}

#[test]
fn gradient_kills_constants() {
    let p = PolynomialVectorField::constant(3, &[2.5]);
    assert!(apply_operator_to_polynomial(&gradient(3, 1), &p)
        .unwrap()
        .is_zero());
}

#[test]
fn symmetric_gradient_kills_rotation() {
    let img = apply_operator_to_polynomial(&symmetric_gradient(2), &rotation()).unwrap();
    assert!(img.max_abs_coefficient() == 0.0);
}

#[test]
fn gradient_of_x1_is_first_axis() {
    let img =
        apply_operator_to_polynomial(&gradient(2, 1), &field(2, 1, &[(&[1, 0], 0, 1.0)])).unwrap();
    assert_eq!(img, PolynomialVectorField::constant(2, &[1.0, 0.0]));
}

#[test]
fn stored_coefficients_are_nonzero() {
    let p = field(
        2,
        1,
        &[(&[1, 0], 0, 1.0), (&[1, 0], 0, -1.0), (&[0, 2], 0, 3.0)],
    );
    assert_eq!(p.num_terms(), 1);
    assert_eq!(p.degree(), 2);
}

#[test]
fn catalog_kernel_dimensions() {
    let cases = [
        (gradient(1, 1), 1),
        (gradient(2, 1), 1),
        (gradient(2, 3), 3),
        (gradient(3, 2), 2),
        (symmetric_gradient(2), 3),
        (symmetric_gradient(3), 6),
    ];
    for (op, dim) in cases {
        let k = kernel_basis(&op, 8);
        assert_eq!(k.dimension(), dim, "{}", op.label());
        assert!(k.stabilized && k.warning.is_none());
    }
    let g = kernel_basis(&gradient(2, 3), 8);
    assert_eq!(g.stable_degree, Some(0));
    assert!(g.elements.iter().all(|e| e.degree() == 0));
    assert_eq!(
        kernel_basis(&symmetric_gradient(3), 8).stable_degree,
        Some(1)
    );
}

#[test]
fn unstable_kernels_warn() {
    for op in [cauchy_riemann(), partial_x_only(), divergence(2)] {
        let k = kernel_basis(&op, 4);
        assert!(!k.stabilized, "{}", op.label());
        assert!(k.warning.is_some());
    }
}

/// Nullity of `A` on polynomials of total degree `<= 2`, assembled from
/// central differences at random points (exact for quadratics).
fn quadratic_nullity_oracle(op: &Operator) -> usize {
    let (d, n) = (op.dim_space(), op.dim_from());
    let mut monomials: Vec<Vec<u32>> = Vec::new();
    let mut alpha = vec![0u32; d];
    loop {
        if alpha.iter().sum::<u32>() <= 2 {
            monomials.push(alpha.clone());
        }
        let mut j = 0;
        while j < d {
            alpha[j] += 1;
            if alpha[j] <= 2 {
                break;
            }
            alpha[j] = 0;
            j += 1;
        }
        if j == d {
            break;
        }
    }
    let eval = |alpha: &[u32], x: &[f64]| {
        alpha
            .iter()
            .zip(x)
            .map(|(a, xi)| xi.powi(*a as i32))
            .product::<f64>()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let points: Vec<Vec<f64>> = (0..12)
        .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let step = 1e-2;
    let k = op.dim_to();
    let mut m = DMatrix::<f64>::zeros(points.len() * k, monomials.len() * n);
    for (mi, a) in monomials.iter().enumerate() {
        for c in 0..n {
            for (pi, x) in points.iter().enumerate() {
                for j in 0..d {
                    let (mut xp, mut xm) = (x.clone(), x.clone());
                    xp[j] += step;
                    xm[j] -= step;
                    let dj = (eval(a, &xp) - eval(a, &xm)) / (2.0 * step);
                    for r in 0..k {
                        m[(pi * k + r, mi * n + c)] += op.matrix(j)[(r, c)] * dj;
                    }
                }
            }
        }
    }
    m.ncols() - m.svd(false, false).rank(1e-8)
}

#[test]
fn kernel_dimension_matches_finite_difference_oracle() {
    for op in [
        gradient(2, 1),
        gradient(3, 2),
        symmetric_gradient(2),
        symmetric_gradient(3),
        cauchy_riemann(),
        partial_x_only(),
        divergence(2),
    ] {
        assert_eq!(
            kernel_basis(&op, 2).dimension(),
            quadratic_nullity_oracle(&op),
            "{}",
            op.label()
        );
    }
}

#[test]
fn evaluate_examples() {
    assert_eq!(
        PolynomialVectorField::constant(2, &[1.5, -2.0])
            .evaluate(&[7.0, 3.0])
            .unwrap(),
        vec![1.5, -2.0]
    );
    assert_eq!(rotation().evaluate(&[1.0, 2.0]).unwrap(), vec![-2.0, 1.0]);
}

#[test]
fn degree_two_evaluation_matches_repeated_multiplication() {
    let p = field(
        3,
        2,
        &[
            (&[2, 0, 0], 0, 0.7),
            (&[1, 1, 0], 1, -1.3),
            (&[0, 1, 1], 0, 2.1),
            (&[0, 0, 2], 1, 0.4),
        ],
    );
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
        let expected = [
            0.7 * x[0] * x[0] + 2.1 * x[1] * x[2],
            -1.3 * x[0] * x[1] + 0.4 * x[2] * x[2],
        ];
        let got = p.evaluate(&x).unwrap();
        for (g, e) in got.iter().zip(expected) {
            assert!((g - e).abs() <= 1e-14 * (1.0 + e.abs()));
        }
    }
}

#[test]
fn counterexample_for_first_axis_derivative() {
    let op = partial_x_only();
    let cert = check_ellipticity(&op, Field::Real, 1e-8, SearchParams::default()).unwrap();
    let ce = hyperplane_counterexample(&op, &cert).unwrap();
    assert!(ce.normal[0].abs() < 1e-8 && (ce.normal[1].abs() - 1.0).abs() < 1e-12);
    assert_eq!(ce.offset, 0.0);
    assert!(
        apply_operator_to_polynomial(&op, &ce.field)
            .unwrap()
            .max_abs_coefficient()
            <= 1e-10
    );
    // f(x) = <xi, x> v, so f(0, 1) = xi_2 v.
    let at = ce.field.evaluate(&[0.0, 1.0]).unwrap();
    for (a, v) in at.iter().zip(&ce.direction) {
        assert!((a - ce.normal[1] * v).abs() < 1e-12);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = &ce.normal;
    for _ in 0..100 {
        let t: f64 = rng.random_range(-10.0..10.0);
        let x = [-n[1] * t, n[0] * t];
        assert!(ce
            .field
            .evaluate(&x)
            .unwrap()
            .iter()
            .all(|v| v.abs() <= 1e-12 * (1.0 + t.abs())));
    }
}

#[test]
fn counterexample_needs_a_real_failure() {
    let op = gradient(2, 1);
    let cert = check_ellipticity(&op, Field::Real, 1e-8, SearchParams::default()).unwrap();
    assert!(hyperplane_counterexample(&op, &cert).is_err());
}

/// Orthonormal basis of the complement of `normal`.
fn tangent_basis(normal: &[f64]) -> Vec<Vec<f64>> {
    let d = normal.len();
    let m = DMatrix::from_fn(d, d, |i, j| {
        if j == 0 {
            normal[i]
        } else if i == j - 1 {
            1.0
        } else {
            0.0
        }
    });
    let q = m.qr().q();
    (1..d)
        .map(|j| q.column(j).iter().copied().collect())
        .collect()
}

fn surface_gram(kernel: &KernelBasis, points: &[Vec<f64>], weight: f64) -> DMatrix<f64> {
    let values: Vec<Vec<Vec<f64>>> = kernel
        .elements
        .iter()
        .map(|e| points.iter().map(|x| e.evaluate(x).unwrap()).collect())
        .collect();
    let l = kernel.dimension();
    DMatrix::from_fn(l, l, |i, j| {
        weight
            * values[i]
                .iter()
                .zip(&values[j])
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>())
                .sum::<f64>()
    })
}

#[test]
fn kernels_restrict_injectively_to_hyperplane_patches() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for (op, cap) in [
        (gradient(1, 2), 8),
        (gradient(2, 1), 8),
        (gradient(3, 2), 8),
        (symmetric_gradient(2), 8),
        (symmetric_gradient(3), 8),
        (cauchy_riemann(), 3),
    ] {
        let cert = check_ellipticity(&op, Field::Real, 1e-8, SearchParams::default()).unwrap();
        assert!(cert.is_elliptic());
        let kernel = kernel_basis(&op, cap);
        let d = op.dim_space();
        for _ in 0..5 {
            let mut normal: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let len = normal.iter().map(|v| v * v).sum::<f64>().sqrt();
            normal.iter_mut().for_each(|v| *v /= len);
            let base: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..1.0)).collect();
            let tangents = tangent_basis(&normal);
            let per_axis = 9usize;
            let count = per_axis.pow(tangents.len() as u32);
            let points: Vec<Vec<f64>> = (0..count)
                .map(|mut i| {
                    let mut x = base.clone();
                    for t in &tangents {
                        let s = (i % per_axis) as f64 / (per_axis - 1) as f64 - 0.5;
                        i /= per_axis;
                        x.iter_mut().zip(t).for_each(|(xi, ti)| *xi += s * ti);
                    }
                    x
                })
                .collect();
            let gram = surface_gram(&kernel, &points, 1.0 / count as f64);
            let smallest = gram.symmetric_eigenvalues().min();
            assert!(
                smallest > 1e-10,
                "{}: smallest Gram eigenvalue {smallest:e}",
                op.label()
            );
        }
    }
}

fn span_rank(a: &KernelBasis, b: &KernelBasis) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let d = a.dim_space;
    let points: Vec<Vec<f64>> = (0..40)
        .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let rows: Vec<DVector<f64>> = a
        .elements
        .iter()
        .chain(&b.elements)
        .map(|e| {
            DVector::from_iterator(
                points.len() * a.dim_values,
                points.iter().flat_map(|x| e.evaluate(x).unwrap()),
            )
        })
        .collect();
    DMatrix::from_columns(&rows).svd(false, false).rank(1e-9)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn kernel_elements_are_annihilated(which in 0usize..5, cap in 0usize..5) {
        let op = [gradient(2, 2), symmetric_gradient(2), symmetric_gradient(3), cauchy_riemann(), divergence(2)][which].clone();
        for e in &kernel_basis(&op, cap).elements {
            prop_assert!(apply_operator_to_polynomial(&op, e).unwrap().coefficient_norm() <= 1e-10);
        }
    }

    #[test]
    fn kernel_dimension_grows_with_cap(which in 0usize..4, cap in 0usize..5) {
        let op = [symmetric_gradient(2), cauchy_riemann(), partial_x_only(), divergence(2)][which].clone();
        let k = kernel_basis(&op, cap + 1);
        prop_assert!(kernel_basis(&op, cap).dimension() <= k.dimension());
        prop_assert!(k.dims_by_degree.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn gradient_kernel_is_constants(d in 1usize..4, n in 1usize..4, cap in 0usize..5) {
        prop_assert_eq!(kernel_basis(&gradient(d, n), cap).dimension(), n);
    }

    #[test]
    fn kernel_span_ignores_operator_scaling(which in 0usize..4, factor in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0]) {
        let op = [gradient(2, 2), symmetric_gradient(2), symmetric_gradient(3), cauchy_riemann()][which].clone();
        let a = kernel_basis(&op, 3);
        let b = kernel_basis(&op.scaled(factor), 3);
        prop_assert_eq!(a.dimension(), b.dimension());
        prop_assert_eq!(span_rank(&a, &b), a.dimension());
    }
}
