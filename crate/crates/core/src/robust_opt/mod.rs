//! Robust covariance design: the S-procedure LMI, the nominal and enumeration
//! benchmarks, and the exact worst case under the quadratic model.

mod io;
mod lmi;
pub mod trust_region;

use std::time::Instant;

use log::{debug, warn};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::array_model::RadarScene;
use crate::fisher_pcrb::{hermitian_defect, pcrb_from_information, PcrbValue, TransmitCovariance};
use crate::prior_pdf::ErrorVector;
use crate::quad_model::{g_vector, QuadraticPcrbModel};
use crate::{CMatrix, Error, Result, C64};

pub use io::{parse_solution, write_solution};
pub use lmi::HermitianBasis;
pub use lmi_sdp::{Residuals, Settings as SolverSettings, Status as SolverStatus};

/// Output of any of the three design schemes.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustSolution {
    pub w_star: TransmitCovariance,
    /// Guaranteed (worst-case, for the robust scheme) posterior Fisher information.
    pub t_star: f64,
    /// S-procedure multiplier; zero for the benchmarks.
    pub lambda_star: f64,
    pub status: SolverStatus,
    /// `1/t_star`.
    pub pcrb_star: f64,
    /// Final solver residuals; `None` for closed-form solutions.
    pub residuals: Option<Residuals>,
    pub iterations: usize,
}

/// How the `N × N` S-procedure block is handed to the conic solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LmiForm {
    /// One dense PSD block.
    Dense,
    /// The equivalent set of 2×2 cones; much cheaper per iteration.
    #[default]
    Split,
}

/// Exact minimizer of the surrogate constraint over the uncertainty ball.
#[derive(Debug, Clone, PartialEq)]
pub struct WorstCaseCertificate {
    pub u_star: DVector<f64>,
    /// `B·u_star`.
    pub e_star: ErrorVector,
    /// Worst-case posterior Fisher information under the surrogate.
    pub objective: f64,
    pub pcrb: f64,
    pub boundary: bool,
}

/// `[[Re H, −Im H], [Im H, Re H]]`.
pub fn realify_hermitian(h: &CMatrix) -> Result<DMatrix<f64>> {
    if !h.is_square() {
        return Err(Error::InvalidInput("matrix must be square".into()));
    }
    let scale = h.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let asym = hermitian_defect(h);
    if asym > 1e-10 * (1.0 + scale) {
        return Err(Error::NotHermitian(asym));
    }
    Ok(crate::array_model::realify_unchecked(h))
}

/// Hermitian projection onto `{W ⪰ 0, tr W ≤ P}` by eigenvalue clipping and
/// rescaling. Removes solver round-off; not a general projection.
fn clean_covariance(w: &CMatrix, power: f64) -> TransmitCovariance {
    let h = (w + w.adjoint()).scale(0.5);
    let eig = SymmetricEigen::new(h);
    let vals = eig.eigenvalues.map(|v| v.max(0.0));
    let vecs = eig.eigenvectors;
    let mut out = CMatrix::zeros(w.nrows(), w.ncols());
    for (k, v) in vals.iter().enumerate() {
        if *v > 0.0 {
            let c = vecs.column(k);
            out += c * c.adjoint() * C64::new(*v, 0.0);
        }
    }
    let out = (&out + out.adjoint()).scale(0.5);
    let tr: f64 = (0..out.nrows()).map(|i| out[(i, i)].re).sum();
    let out = if tr > power {
        out * C64::new(power / tr, 0.0)
    } else {
        out
    };
    TransmitCovariance::new_unchecked(out)
}

fn default_settings() -> SolverSettings {
    SolverSettings::default()
}

/// Solve, and on numerical failure retry once at the relaxed tolerance.
fn solve_with_retry(problem: &lmi_sdp::LmiProblem) -> Result<lmi_sdp::Solution> {
    let settings = default_settings();
    let sol = lmi_sdp::solve(problem, &settings)?;
    if sol.status != SolverStatus::NumericalFailure {
        return Ok(sol);
    }
    warn!(
        "solver failed at tolerance {:.0e}; retrying relaxed",
        settings.tolerance
    );
    let relaxed = SolverSettings {
        tolerance: settings.relaxed_tolerance,
        ..settings
    };
    Ok(lmi_sdp::solve(problem, &relaxed)?)
}

/// Closed-form optimum of the nominal problem `max p̄ᵀg(W) + C_P`.
pub fn solve_nominal(model: &QuadraticPcrbModel, scene: &RadarScene) -> Result<RobustSolution> {
    let a = model.nominal_gain();
    let n = a.nrows();
    let eig = SymmetricEigen::new(a.clone());
    let (k, top) =
        eig.eigenvalues
            .iter()
            .copied()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, v)| if v > acc.1 { (i, v) } else { acc },
            );
    let p = scene.power_budget;
    let w = if top <= 1e-300 || a.iter().all(|z| z.norm() == 0.0) {
        warn!("nominal gain matrix vanishes; returning the isotropic covariance");
        TransmitCovariance::isotropic(scene)
    } else {
        let v = eig.eigenvectors.column(k).into_owned();
        let v = &v / C64::new(v.norm(), 0.0);
        clean_covariance(&((&v * v.adjoint()) * C64::new(p, 0.0)), p)
    };
    let t = model.nominal_information(&w);
    debug!("nominal: λ_max = {top:.6e}, t = {t:.6e}, n = {n}");
    Ok(RobustSolution {
        pcrb_star: pcrb_from_information(t)?.value,
        w_star: w,
        t_star: t,
        lambda_star: 0.0,
        status: SolverStatus::Optimal,
        residuals: None,
        iterations: 0,
    })
}

/// The nominal problem posed through the conic solver; cross-checks [`solve_nominal`].
pub fn solve_nominal_conic(
    model: &QuadraticPcrbModel,
    scene: &RadarScene,
) -> Result<RobustSolution> {
    enumeration_with_nominal(model, scene, &[])
}

/// Robust design: maximize the worst-case surrogate information over the ball.
///
/// A zero radius is answered by [`solve_nominal`], since the S-procedure needs a
/// strictly feasible ball.
pub fn solve_robust(model: &QuadraticPcrbModel, scene: &RadarScene) -> Result<RobustSolution> {
    solve_robust_with(model, scene, LmiForm::default())
}

/// [`solve_robust`] with an explicit choice of cone layout.
pub fn solve_robust_with(
    model: &QuadraticPcrbModel,
    scene: &RadarScene,
    form: LmiForm,
) -> Result<RobustSolution> {
    if model.delta == 0.0 {
        return solve_nominal(model, scene);
    }
    let start = Instant::now();
    let lmi = lmi::RobustLmi::assemble(model, scene, form)?;
    let sol = solve_with_retry(&lmi.problem)?;
    let out = lmi.recover(&sol, scene)?;
    debug!(
        "robust ({form:?}): δ = {}, status = {}, t = {:.9e}, {} iterations, {:.3} s",
        model.delta,
        out.status,
        out.t_star,
        out.iterations,
        start.elapsed().as_secs_f64()
    );
    Ok(out)
}

/// Benchmark that enforces the surrogate constraint only at the listed errors
/// and at the nominal prior `e = 0`, which is always included.
pub fn solve_enumeration(
    model: &QuadraticPcrbModel,
    scene: &RadarScene,
    samples: &[ErrorVector],
) -> Result<RobustSolution> {
    if samples.is_empty() {
        return Err(Error::InvalidInput(
            "enumeration needs at least one error sample".into(),
        ));
    }
    enumeration_with_nominal(model, scene, samples)
}

fn enumeration_with_nominal(
    model: &QuadraticPcrbModel,
    scene: &RadarScene,
    samples: &[ErrorVector],
) -> Result<RobustSolution> {
    if samples.iter().any(|e| e.e.len() != model.n_points()) {
        return Err(Error::InvalidInput(
            "sample length differs from the grid".into(),
        ));
    }
    let mut all = Vec::with_capacity(samples.len() + 1);
    all.push(ErrorVector::zeros(model.grid()));
    all.extend(
        samples
            .iter()
            .filter(|e| e.e.iter().any(|v| *v != 0.0))
            .cloned(),
    );
    let lmi = lmi::EnumerationLp::assemble(model, scene, &all)?;
    let sol = solve_with_retry(&lmi.problem)?;
    lmi.recover(&sol, scene)
}

/// Draw error vectors `B·u` with `u` uniform in the ball of radius `δ/√Δθ`, or
/// uniform on its sphere when `boundary_only` is set.
pub fn sample_ball_errors(
    model: &QuadraticPcrbModel,
    count: usize,
    boundary_only: bool,
    seed: u64,
) -> Vec<ErrorVector> {
    let m = model.n_points() - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Uniform::new(0.0, 1.0).expect("unit interval");
    (0..count)
        .map(|_| {
            let z = DVector::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
            let radius = if boundary_only {
                model.ball_radius
            } else {
                let s: f64 = unit.sample(&mut rng);
                model.ball_radius * s.powf(1.0 / m as f64)
            };
            let u = z.normalize() * radius;
            ErrorVector::new(&model.basis * u, model.grid())
        })
        .collect()
}

/// Exact worst case of the surrogate constraint for a fixed covariance.
pub fn trust_region_worst_case(
    model: &QuadraticPcrbModel,
    w: &TransmitCovariance,
) -> Result<WorstCaseCertificate> {
    if w.dim() != model.n_tx() {
        return Err(Error::InvalidInput(
            "covariance size differs from the model".into(),
        ));
    }
    let g = g_vector(model, w);
    let base = model.c_p + model.p_bar.density().dot(&g);
    let sp = model.reduced_spectrum();
    let b = model.basis.transpose() * (&model.f_p + &g);
    let tr =
        trust_region::solve_spectral(&sp.eigenvalues, &sp.eigenvectors, &b, model.ball_radius)?;
    let objective = tr.value + base;
    let e = &model.basis * &tr.u;
    Ok(WorstCaseCertificate {
        e_star: ErrorVector::new(e, model.grid()),
        objective,
        pcrb: pcrb_from_information(objective).map_or(f64::INFINITY, |v: PcrbValue| v.value),
        boundary: tr.boundary,
        u_star: tr.u,
    })
}

/// Smallest eigenvalue of the S-procedure block matrix at `(W, t, λ)`,
/// divided by its trace. Computed in the eigenbasis of `BᵀQ_PB`, which leaves
/// the spectrum unchanged.
pub fn lmi_residual(model: &QuadraticPcrbModel, sol: &RobustSolution) -> f64 {
    let sp = model.reduced_spectrum();
    let m = sp.eigenvalues.len();
    let g = g_vector(model, &sol.w_star);
    let h = sp.eigenvectors.transpose() * (model.basis.transpose() * (&model.f_p + &g)) * 0.5;
    let corner = model.c_p + model.p_bar.density().dot(&g)
        - sol.t_star
        - sol.lambda_star * model.ball_radius * model.ball_radius;
    let mut phi = DMatrix::zeros(m + 1, m + 1);
    for k in 0..m {
        phi[(k, k)] = sol.lambda_star + sp.eigenvalues[k];
        phi[(k, m)] = h[k];
        phi[(m, k)] = h[k];
    }
    phi[(m, m)] = corner;
    let trace = phi.trace();
    phi.symmetric_eigenvalues().min() / trace.abs().max(f64::MIN_POSITIVE)
}
