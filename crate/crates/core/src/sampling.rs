//! Seeded random test fields: smooth trigonometric/polynomial mixtures and
//! mollified ball indicators.

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::nullspace::homogeneous_indices;
use crate::polynomial::{monomial, MultiIndex};

pub const MAX_WAVENUMBER: u32 = 4;
pub const MAX_POLY_DEGREE: u32 = 3;

/// `sum_kappa a_kappa cos(pi kappa . y) + b_kappa sin(pi kappa . y) +
/// sum_alpha c_alpha y^alpha` with `y` the point rescaled so that the
/// reference box maps to the unit cube.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothField {
    components: usize,
    lo: Vec<f64>,
    inv_width: Vec<f64>,
    modes: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)>,
    monomials: Vec<(MultiIndex, Vec<f64>)>,
}

fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect()
}

impl SmoothField {
    pub fn random(rng: &mut ChaCha8Rng, components: usize, lo: &[f64], hi: &[f64]) -> Self {
        let d = lo.len();
        let mut modes = Vec::new();
        let mut kappa = vec![0u32; d];
        loop {
            let mut j = 0;
            while j < d && kappa[j] == MAX_WAVENUMBER {
                kappa[j] = 0;
                j += 1;
            }
            if j == d {
                break;
            }
            kappa[j] += 1;
            let k: Vec<f64> = kappa
                .iter()
                .map(|&v| core::f64::consts::PI * v as f64)
                .collect();
            modes.push((k, normals(rng, components), normals(rng, components)));
        }
        let mut monomials = Vec::new();
        for m in 0..=MAX_POLY_DEGREE {
            for alpha in homogeneous_indices(d, m) {
                monomials.push((alpha, normals(rng, components)));
            }
        }
        Self {
            components,
            lo: lo.to_vec(),
            inv_width: lo.iter().zip(hi).map(|(a, b)| 1.0 / (b - a)).collect(),
            modes,
            monomials,
        }
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn evaluate_into(&self, x: &[f64], out: &mut [f64]) {
        let y: Vec<f64> = x
            .iter()
            .zip(&self.lo)
            .zip(&self.inv_width)
            .map(|((v, l), w)| (v - l) * w)
            .collect();
        out.iter_mut().for_each(|o| *o = 0.0);
        for (k, a, b) in &self.modes {
            let t = crate::linalg::dot(k, &y);
            let (s, c) = (libm::sin(t), libm::cos(t));
            for i in 0..self.components {
                out[i] += a[i] * c + b[i] * s;
            }
        }
        for (alpha, c) in &self.monomials {
            let m = monomial(&y, alpha);
            for i in 0..self.components {
                out[i] += c[i] * m;
            }
        }
    }
}

/// `value * (1 - tanh((|x - center| - radius) / width)) / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct MollifiedIndicator {
    pub center: Vec<f64>,
    pub radius: f64,
    pub width: f64,
    pub value: Vec<f64>,
}

impl MollifiedIndicator {
    /// Random ball with center in the middle half of the box and radius a
    /// random fraction of its smallest half-width.
    pub fn random(rng: &mut ChaCha8Rng, components: usize, lo: &[f64], hi: &[f64]) -> Self {
        let center = lo
            .iter()
            .zip(hi)
            .map(|(a, b)| a + (b - a) * rng.random_range(0.25..0.75))
            .collect();
        let half = lo
            .iter()
            .zip(hi)
            .map(|(a, b)| 0.5 * (b - a))
            .fold(f64::INFINITY, f64::min);
        let radius = half * rng.random_range(0.2..0.5);
        Self {
            center,
            radius,
            width: 0.25 * radius,
            value: normals(rng, components),
        }
    }

    pub fn evaluate_into(&self, x: &[f64], out: &mut [f64]) {
        let r = libm::sqrt(
            x.iter()
                .zip(&self.center)
                .map(|(a, b)| (a - b) * (a - b))
                .sum(),
        );
        let s = 0.5 * (1.0 - libm::tanh((r - self.radius) / self.width));
        for (o, v) in out.iter_mut().zip(&self.value) {
            *o = v * s;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SampleField {
    Smooth(SmoothField),
    Indicator(MollifiedIndicator),
}

impl SampleField {
    pub fn evaluate_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            SampleField::Smooth(f) => f.evaluate_into(x, out),
            SampleField::Indicator(f) => f.evaluate_into(x, out),
        }
    }
}
