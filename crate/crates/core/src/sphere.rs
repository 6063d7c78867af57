//! Derivative-free minimization over the unit sphere: seeded sampling
//! followed by golden-section line searches along random great circles.

use alloc::vec::Vec;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{axpy, dot, norm, scale};

const GOLDEN: f64 = 0.618_033_988_749_894_9;
const LINE_ITERATIONS: usize = 64;
const BRACKET: f64 = 0.5;

pub(crate) fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..dim)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let n = norm(&v);
        if n > 1e-12 {
            scale(1.0 / n, &mut v);
            return v;
        }
    }
}

fn random_tangent(rng: &mut ChaCha8Rng, x: &[f64]) -> Option<Vec<f64>> {
    for _ in 0..8 {
        let mut t = random_unit(rng, x.len());
        let p = dot(&t, x);
        axpy(-p, x, &mut t);
        let n = norm(&t);
        if n > 1e-8 {
            scale(1.0 / n, &mut t);
            return Some(t);
        }
    }
    None
}

fn on_circle(x: &[f64], t: &[f64], theta: f64, out: &mut Vec<f64>) {
    let (s, c) = (libm::sin(theta), libm::cos(theta));
    out.clear();
    out.extend(x.iter().zip(t).map(|(a, b)| c * a + s * b));
    let n = norm(out);
    scale(1.0 / n, out);
}

pub(crate) struct SphereResult {
    pub value: f64,
    pub argmin: Vec<f64>,
    pub evaluations: usize,
}

/// Minimizes `f` over the unit sphere of `R^dim`.
///
/// `starts` are evaluated before the `samples` random points. Each
/// refinement round runs `8 * dim` golden-section searches over
/// `[-0.5, 0.5]` radians along random great circles through the incumbent.
pub(crate) fn minimize_on_sphere<F>(
    dim: usize,
    samples: usize,
    refine_rounds: usize,
    rng: &mut ChaCha8Rng,
    starts: &[Vec<f64>],
    mut f: F,
) -> SphereResult
where
    F: FnMut(&[f64]) -> f64,
{
    let mut best_value = f64::INFINITY;
    let mut best: Vec<f64> = Vec::new();
    let mut evaluations = 0usize;
    let mut consider =
        |x: Vec<f64>, best_value: &mut f64, best: &mut Vec<f64>, evals: &mut usize| {
            let v = f(&x);
            *evals += 1;
            if v < *best_value || best.is_empty() {
                *best_value = v;
                *best = x;
            }
        };
    for s in starts {
        let mut x = s.clone();
        let n = norm(&x);
        if n > 0.0 {
            scale(1.0 / n, &mut x);
            consider(x, &mut best_value, &mut best, &mut evaluations);
        }
    }
    for _ in 0..samples {
        let x = random_unit(rng, dim);
        consider(x, &mut best_value, &mut best, &mut evaluations);
    }
    if dim < 2 {
        return SphereResult {
            value: best_value,
            argmin: best,
            evaluations,
        };
    }
    let mut trial = Vec::with_capacity(dim);
    for _round in 0..refine_rounds {
        for _ in 0..8 * dim {
            let Some(t) = random_tangent(rng, &best) else {
                continue;
            };
            let (mut a, mut b) = (-BRACKET, BRACKET);
            let mut c = b - GOLDEN * (b - a);
            let mut d = a + GOLDEN * (b - a);
            on_circle(&best, &t, c, &mut trial);
            let mut fc = f(&trial);
            on_circle(&best, &t, d, &mut trial);
            let mut fd = f(&trial);
            evaluations += 2;
            for _ in 0..LINE_ITERATIONS {
                if fc < fd {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - GOLDEN * (b - a);
                    on_circle(&best, &t, c, &mut trial);
                    fc = f(&trial);
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + GOLDEN * (b - a);
                    on_circle(&best, &t, d, &mut trial);
                    fd = f(&trial);
                }
                evaluations += 1;
            }
            let (theta, value) = if fc < fd { (c, fc) } else { (d, fd) };
            if value < best_value {
                on_circle(&best, &t, theta, &mut trial);
                best_value = value;
                best = trial.clone();
            }
        }
    }
    SphereResult {
        value: best_value,
        argmin: best,
        evaluations,
    }
}
