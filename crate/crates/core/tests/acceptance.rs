//! Acceptance criteria 1–12. Each test writes one `criterion N: PASS|FAIL`
//! line straight to stderr, so the verdicts show up even when output capture
//! is on.

mod common;

use std::io::Write;
use std::time::{Duration, Instant};

use common::{
    default_scene, desk_model, gridded, model, prior_information_oracle, random_covariance,
    random_mixture, random_symmetric, random_vector, relative_direction, remainders, rng,
    two_target_mixture,
};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use robust_pcrb::array_model::{m_dot_matrix, m_matrix};
use robust_pcrb::experiments::{
    run_beampattern, run_delta_sweep, run_timing_comparison, ExperimentConfig, Scheme,
};
use robust_pcrb::fisher_pcrb::{fim_obs_theta, fim_prior_theta};
use robust_pcrb::prior_pdf::{AngleGrid, GaussianMixture};
use robust_pcrb::quad_model::g_vector;
use robust_pcrb::robust_opt::trust_region::solve_dense;
use robust_pcrb::robust_opt::{
    realify_hermitian, sample_ball_errors, solve_enumeration, solve_nominal, solve_robust,
    trust_region_worst_case, SolverSettings, SolverStatus,
};
use robust_pcrb::{CMatrix, C64};

fn verdict(n: u32, pass: bool, detail: &str) {
    let line = format!(
        "criterion {n:>2}: {} {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "criterion {n} failed: {detail}");
}

#[test]
fn criterion_01_s_procedure_exactness() {
    let start = Instant::now();
    let scene = default_scene();
    let mut r = rng(101);
    let cases: Vec<(GaussianMixture, f64)> = (0..20)
        .map(|_| (random_mixture(&mut r), r.random_range(0.1..2.0)))
        .collect();
    let errors: Vec<f64> = cases
        .par_iter()
        .map(|(mix, delta)| {
            let m = model(mix, &scene, 64, *delta);
            let sol = solve_robust(&m, &scene).unwrap();
            let cert = trust_region_worst_case(&m, &sol.w_star).unwrap();
            (sol.t_star - cert.objective).abs() / sol.t_star.abs()
        })
        .collect();
    let worst = errors.iter().copied().fold(0.0, f64::max);
    let elapsed = start.elapsed();
    verdict(
        1,
        worst <= 1e-5 && elapsed < Duration::from_secs(300),
        &format!(
            "max |t* - oracle|/t* = {worst:.2e} over 20 instances in {:.1} s",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_02_relaxation_ordering() {
    let scene = default_scene();
    let mut r = rng(202);
    let cases: Vec<(GaussianMixture, f64, u64)> = (0..10)
        .map(|i| (random_mixture(&mut r), r.random_range(0.1..2.0), 2000 + i))
        .collect();
    let slack: Vec<(f64, f64)> = cases
        .par_iter()
        .map(|(mix, delta, seed)| {
            let m = model(mix, &scene, 64, *delta);
            let nominal = solve_nominal(&m, &scene).unwrap().t_star;
            let samples = sample_ball_errors(&m, 200, false, *seed);
            let enumeration = solve_enumeration(&m, &scene, &samples).unwrap().t_star;
            let robust = solve_robust(&m, &scene).unwrap().t_star;
            (nominal - enumeration, enumeration - robust)
        })
        .collect();
    let low_upper = slack.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let low_lower = slack.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    verdict(
        2,
        low_upper >= -1e-6 && low_lower >= -1e-6,
        &format!("min(t_nom - t_enum) = {low_upper:.3e}, min(t_enum - t_rob) = {low_lower:.3e}"),
    );
}

#[test]
fn criterion_03_delta_monotonicity() {
    let scene = default_scene();
    let deltas = [0.0, 0.4, 0.8, 1.2, 1.6, 2.0];
    let pcrb: Vec<f64> = deltas
        .par_iter()
        .map(|&d| solve_robust(&desk_model(128, d), &scene).unwrap().pcrb_star)
        .collect();
    // Once the worst case turns interior the exact optima tie, and separate
    // solves can only be ordered to within the duality-gap tolerance.
    let gap = SolverSettings::default().tolerance;
    let violations = pcrb
        .windows(2)
        .filter(|w| w[1] < w[0] * (1.0 - gap))
        .count();
    let largest_drop = pcrb
        .windows(2)
        .map(|w| (w[0] - w[1]) / w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    verdict(
        3,
        violations == 0,
        &format!(
            "{violations} violations, largest relative drop {largest_drop:.2e}, pcrb* = [{}]",
            pcrb.iter()
                .map(|v| format!("{v:.9e}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    );
}

#[test]
fn criterion_04_robustness_payoff() {
    let scene = default_scene();
    let m = desk_model(128, 1.6);
    let robust = solve_robust(&m, &scene).unwrap();
    let nominal = solve_nominal(&m, &scene).unwrap();
    let r = trust_region_worst_case(&m, &robust.w_star).unwrap().pcrb;
    let n = trust_region_worst_case(&m, &nominal.w_star).unwrap().pcrb;
    let ratio = n / r;
    verdict(
        4,
        ratio >= 1.2,
        &format!("nominal/robust worst-case PCRB = {ratio:.4}"),
    );
}

#[test]
fn criterion_05_small_radius_collapse() {
    let scene = default_scene();
    let m = desk_model(128, 1e-6);
    let robust = solve_robust(&m, &scene).unwrap().pcrb_star;
    let nominal = solve_nominal(&m, &scene).unwrap().pcrb_star;
    let rel = (robust - nominal).abs() / nominal;
    verdict(5, rel <= 1e-3, &format!("relative difference {rel:.2e}"));
}

#[test]
fn criterion_06_taylor_remainder_is_cubic() {
    let m = desk_model(628, 0.1);
    let mut r = rng(6);
    let mut worst = f64::INFINITY;
    for _ in 0..20 {
        let d = relative_direction(&m, &mut r);
        let err = remainders(&m, &d, &[1e-2, 5e-3, 2.5e-3]);
        worst = worst.min(err[0] / err[1]).min(err[1] / err[2]);
    }
    verdict(
        6,
        worst >= 7.0,
        &format!("smallest reduction per halving {worst:.3} (Δθ = 0.005, 20 directions)"),
    );
}

#[test]
fn criterion_07_prior_fisher_quadrature() {
    let n = AngleGrid::with_spacing(0.005).unwrap().n_points();
    let single = fim_prior_theta(&gridded(&GaussianMixture::single(0.0, 1e-3), n)).unwrap();
    let mix = two_target_mixture();
    let grid_value = fim_prior_theta(&gridded(&mix, n)).unwrap();
    let oracle = prior_information_oracle(&mix, 10 * n);
    let pass = (single - 1000.0).abs() <= 10.0
        && (grid_value - oracle).abs() <= 0.02 * oracle
        && (grid_value - 852.0).abs() <= 0.02 * 852.0;
    verdict(
        7,
        pass,
        &format!("single {single:.2}, mixture {grid_value:.2} (refined oracle {oracle:.2}, expected 852)"),
    );
}

/// 30-dimensional trust-region instance; every fifth one is a forced hard case
/// with `b` orthogonal to the leftmost eigenvector and too short to reach the
/// boundary on its own.
fn trust_region_instance(r: &mut ChaCha8Rng, k: usize) -> (DMatrix<f64>, DVector<f64>, f64) {
    let n = 30;
    let radius = r.random_range(0.5..2.0);
    if !k.is_multiple_of(5) {
        return (random_symmetric(r, n), random_vector(r, n), radius);
    }
    let q = random_symmetric(r, n).qr().q();
    let mut eig: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..3.0)).collect();
    eig[0] = -2.0;
    let a = &q * DMatrix::from_diagonal(&DVector::from_vec(eig.clone())) * q.transpose();
    let mut c = random_vector(r, n);
    c[0] = 0.0;
    // ‖(A − λ₁I)⁺b‖ = ‖c_i/(λ_i − λ₁)‖ kept at half the radius.
    let reach = c
        .iter()
        .zip(&eig)
        .skip(1)
        .map(|(ci, li)| (ci / (li - eig[0])).powi(2))
        .sum::<f64>()
        .sqrt();
    c *= 0.5 * radius / reach;
    (a, &q * c, radius)
}

fn brute_force(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    radius: f64,
    samples: usize,
    r: &mut ChaCha8Rng,
) -> f64 {
    let n = b.len();
    let f = |u: &DVector<f64>| u.dot(&(a * u)) + b.dot(u);
    let mut best: Vec<(f64, DVector<f64>)> = Vec::new();
    for i in 0..samples {
        let z = DVector::from_fn(n, |_, _| StandardNormal.sample(r));
        let scale = if i % 2 == 0 {
            radius
        } else {
            radius * r.random::<f64>().powf(1.0 / n as f64)
        };
        let u = z.normalize() * scale;
        let v = f(&u);
        if best.len() < 8 || v < best[best.len() - 1].0 {
            best.push((v, u));
            best.sort_by(|x, y| x.0.total_cmp(&y.0));
            best.truncate(8);
        }
    }
    // Random search alone cannot resolve 1e-4 in 30 dimensions; polish the
    // best candidates by projected gradient.
    let step = 2.0 * a.norm();
    best.into_iter()
        .map(|(_, mut u)| {
            for _ in 0..50_000 {
                let grad = a * &u * 2.0 + b;
                u -= grad / step;
                let norm = u.norm();
                if norm > radius {
                    u *= radius / norm;
                }
            }
            f(&u)
        })
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn criterion_08_trust_region_oracle() {
    let mut r = rng(808);
    let cases: Vec<_> = (0..50)
        .map(|k| (trust_region_instance(&mut r, k), 9000 + k as u64))
        .collect();
    let results: Vec<(f64, bool)> = cases
        .par_iter()
        .map(|((a, b, radius), seed)| {
            let tr = solve_dense(a, b, *radius).unwrap();
            let brute = brute_force(a, b, *radius, 1_000_000, &mut rng(*seed));
            (
                (tr.value - brute).abs() / brute.abs().max(1e-12),
                tr.hard_case,
            )
        })
        .collect();
    let worst = results.iter().map(|x| x.0).fold(0.0, f64::max);
    let hard = results.iter().filter(|x| x.1).count();
    verdict(
        8,
        worst <= 1e-4 && hard >= 10,
        &format!("max relative gap {worst:.2e} over 50 instances ({hard} hard cases)"),
    );
}

#[test]
fn criterion_09_beampattern_shape() {
    let config = ExperimentConfig::default_config();
    let results = run_beampattern(&config, &[Scheme::Nominal, Scheme::Robust]).unwrap();
    let means = &config.prior.means;
    let inside = |theta: f64| means.iter().any(|m| (theta - m).abs() <= 0.1);
    let window_mass = |k: usize| {
        let res = &results[k];
        let total: f64 = res.pattern.sum();
        let near: f64 = res
            .theta
            .iter()
            .zip(res.pattern.iter())
            .filter(|(t, _)| inside(**t))
            .map(|(_, v)| v)
            .sum();
        near / total
    };
    let nominal = window_mass(0);
    let robust = window_mass(1);
    verdict(
        9,
        nominal >= 0.8 && 1.0 - robust > 1.0 - nominal,
        &format!("mass within ±0.1 rad of the peaks: nominal {nominal:.4}, robust {robust:.4}"),
    );
}

#[test]
fn criterion_10_derivative_and_embedding_identities() {
    let scene = default_scene();
    let h = 1e-5;
    let mut fd_worst = 0.0f64;
    for k in 0..100 {
        let theta = -1.5 + 3.0 * k as f64 / 99.0;
        let analytic = m_dot_matrix(theta, &scene).unwrap();
        let fd = (m_matrix(theta + h, &scene).unwrap() - m_matrix(theta - h, &scene).unwrap())
            / C64::new(2.0 * h, 0.0);
        fd_worst = fd_worst.max((&analytic - &fd).norm() / analytic.norm());
    }

    let mut r = rng(1010);
    let mut eig_worst = 0.0f64;
    for n in 1..8 {
        let g = CMatrix::from_fn(n, n, |_, _| {
            C64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0))
        });
        let h = (&g + g.adjoint()).scale(0.5);
        let mut complex: Vec<f64> = h
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .flat_map(|v| [*v, *v])
            .collect();
        let mut real: Vec<f64> = SymmetricEigen::new(realify_hermitian(&h).unwrap())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        complex.sort_by(f64::total_cmp);
        real.sort_by(f64::total_cmp);
        for (a, b) in complex.iter().zip(&real) {
            eig_worst = eig_worst.max((a - b).abs());
        }
    }

    let m = desk_model(128, 0.5);
    let mut g_worst = 0.0f64;
    for _ in 0..10 {
        let w = random_covariance(&mut r, scene.n_tx, 1.0);
        let direct = fim_obs_theta(&w, &m.p_bar, &m.gains, &scene).unwrap();
        let via_g = m.p_bar.density().dot(&g_vector(&m, &w));
        g_worst = g_worst.max((direct - via_g).abs() / direct);
    }
    verdict(
        10,
        fd_worst <= 1e-6 && eig_worst <= 1e-12 && g_worst <= 1e-12,
        &format!("FD {fd_worst:.2e}, realified spectrum {eig_worst:.2e}, g identity {g_worst:.2e}"),
    );
}

#[test]
fn criterion_11_timing_ordering() {
    let report = run_timing_comparison(&ExperimentConfig::default_config()).unwrap();
    verdict(
        11,
        report.robust_is_faster(),
        &format!(
            "robust {:.4} s vs enumeration(M = {}) {:.4} s, ratio {:.3} at N = {}",
            report.robust_seconds,
            report.enumeration_samples,
            report.enumeration_seconds,
            report.ratio(),
            report.n_points
        ),
    );
}

#[test]
fn criterion_12_desk_budget() {
    let start = Instant::now();
    let config = ExperimentConfig::default_config();
    let records = run_delta_sweep(&config).unwrap();
    run_beampattern(&config, &Scheme::ALL).unwrap();
    run_timing_comparison(&config).unwrap();
    let elapsed = start.elapsed();
    let failed = records
        .iter()
        .filter(|r| r.status.starts_with("error"))
        .count();
    verdict(
        12,
        elapsed < Duration::from_secs(15 * 60) && failed == 0,
        &format!(
            "default experiment set in {:.1} s, {failed} failed cells",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
#[ignore = "paper-scale solve, run on demand"]
fn criterion_12_paper_scale_robust_solve() {
    let start = Instant::now();
    let scene = default_scene();
    let n = AngleGrid::with_spacing(0.005).unwrap().n_points();
    let sol = solve_robust(&desk_model(n, 1.6), &scene).unwrap();
    let elapsed = start.elapsed();
    verdict(
        12,
        sol.status != SolverStatus::NumericalFailure && elapsed < Duration::from_secs(30 * 60),
        &format!(
            "N = {n} robust solve: {} in {:.1} s",
            sol.status,
            elapsed.as_secs_f64()
        ),
    );
}
