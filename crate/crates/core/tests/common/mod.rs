#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robust_pcrb::array_model::{gain_matrices, RadarScene};
use robust_pcrb::fisher_pcrb::{fim_prior_theta, TransmitCovariance};
use robust_pcrb::prior_pdf::{
    discretize_mixture, AngleGrid, ErrorVector, GaussianMixture, GriddedPdf,
};
use robust_pcrb::quad_model::{build_quadratic_model, prior_fisher_quadratic, QuadraticPcrbModel};
use robust_pcrb::{CMatrix, C64};

/// 10 × 12 array, 30 dBm, −90 dBm noise, L = 10, γ = σ_α² = 2e-14.
pub fn default_scene() -> RadarScene {
    RadarScene {
        n_tx: 10,
        n_rx: 12,
        power_budget: 1.0,
        noise_power: 1e-12,
        n_samples: 10,
        gamma: 2e-14,
        alpha_variance: 2e-14,
    }
}

pub fn small_scene(n_tx: usize, n_rx: usize) -> RadarScene {
    RadarScene {
        n_tx,
        n_rx,
        ..default_scene()
    }
}

pub fn two_target_mixture() -> GaussianMixture {
    GaussianMixture::two_target()
}

pub fn gridded(mix: &GaussianMixture, n: usize) -> GriddedPdf {
    discretize_mixture(mix, &AngleGrid::new(n).unwrap()).unwrap()
}

pub fn model(
    mix: &GaussianMixture,
    scene: &RadarScene,
    n: usize,
    delta: f64,
) -> QuadraticPcrbModel {
    let p = gridded(mix, n);
    let gains = gain_matrices(p.grid(), scene);
    build_quadratic_model(&p, gains, scene, delta).unwrap()
}

pub fn desk_model(n: usize, delta: f64) -> QuadraticPcrbModel {
    model(&two_target_mixture(), &default_scene(), n, delta)
}

/// Random mixture with 1 to 3 components well inside the domain.
pub fn random_mixture(rng: &mut ChaCha8Rng) -> GaussianMixture {
    let k = rng.random_range(1..=3);
    let mut w: Vec<f64> = (0..k).map(|_| rng.random_range(0.2..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    let means = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
    let vars = (0..k)
        .map(|_| 10f64.powf(rng.random_range(-3.0..-1.5)))
        .collect();
    GaussianMixture::new(w, means, vars).unwrap()
}

/// Random Hermitian PSD matrix `G Gᴴ` scaled to trace `power`.
pub fn random_covariance(rng: &mut ChaCha8Rng, n: usize, power: f64) -> TransmitCovariance {
    let g = CMatrix::from_fn(n, n, |_, _| {
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    let w = &g * g.adjoint();
    let tr: f64 = (0..n).map(|i| w[(i, i)].re).sum();
    let w = w * C64::new(power / tr, 0.0);
    TransmitCovariance::new_unchecked((&w + w.adjoint()).scale(0.5))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
}

pub fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    (&a + a.transpose()) * 0.5
}

/// Midpoint quadrature of a smooth function on `[−π/2, π/2)` with `n` cells.
pub fn midpoint(n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = std::f64::consts::PI / n as f64;
    (0..n)
        .map(|k| f(-std::f64::consts::FRAC_PI_2 + (k as f64 + 0.5) * h))
        .sum::<f64>()
        * h
}

/// Mixture density renormalized to the angle domain, and its derivative.
pub fn mixture_on_domain(
    mix: &GaussianMixture,
) -> (impl Fn(f64) -> f64 + '_, impl Fn(f64) -> f64 + '_) {
    let raw = |t: f64| {
        mix.weights
            .iter()
            .zip(&mix.means)
            .zip(&mix.variances)
            .map(|((w, m), v)| w * (-(t - m).powi(2) / (2.0 * v)).exp() / (2.0 * PI * v).sqrt())
            .sum::<f64>()
    };
    let raw_d = |t: f64| {
        mix.weights
            .iter()
            .zip(&mix.means)
            .zip(&mix.variances)
            .map(|((w, m), v)| {
                -w * (t - m) / v * (-(t - m).powi(2) / (2.0 * v)).exp() / (2.0 * PI * v).sqrt()
            })
            .sum::<f64>()
    };
    let mass = midpoint(200_000, raw);
    (move |t| raw(t) / mass, move |t| raw_d(t) / mass)
}

/// Prior Fisher information `∫ p′²/p` with the analytic derivative.
pub fn prior_information_oracle(mix: &GaussianMixture, n: usize) -> f64 {
    let (p, dp) = mixture_on_domain(mix);
    midpoint(n, |t| {
        let v = p(t);
        if v > 1e-300 {
            dp(t).powi(2) / v
        } else {
            0.0
        }
    })
}

/// Unit-norm zero-sum direction proportional to `p̄` pointwise, so that small
/// steps keep the density positive in the tails.
pub fn relative_direction(model: &QuadraticPcrbModel, r: &mut ChaCha8Rng) -> DVector<f64> {
    let p = model.p_bar.density();
    let z = random_vector(r, p.len());
    let mut d = p.component_mul(&z);
    let shift = d.sum() / p.sum();
    d -= p * shift;
    d.normalize()
}

/// `|quadratic − exact|` at each step size.
pub fn remainders(model: &QuadraticPcrbModel, d: &DVector<f64>, steps: &[f64]) -> Vec<f64> {
    let grid = model.grid().clone();
    steps
        .iter()
        .map(|&t| {
            let e = d * t;
            let p = GriddedPdf::new(grid.clone(), model.p_bar.density() + &e).unwrap();
            let exact = fim_prior_theta(&p).unwrap();
            let quad = prior_fisher_quadratic(model, &ErrorVector::new(e, &grid)).unwrap();
            (quad - exact).abs()
        })
        .collect()
}
