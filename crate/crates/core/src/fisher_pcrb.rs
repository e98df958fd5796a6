//! Posterior Fisher information by midpoint quadrature and the resulting PCRB.

use nalgebra::Matrix2;

use crate::array_model::{transmit_steering, GainMatrix, RadarScene};
use crate::prior_pdf::GriddedPdf;
use crate::quad_model::DifferenceMatrix;
use crate::{CMatrix, Error, Result, C64};

/// Hermitian PSD transmit sample covariance `W`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmitCovariance {
    w: CMatrix,
}

impl TransmitCovariance {
    /// Validate Hermitian symmetry, positive semidefiniteness and the power budget.
    pub fn new(w: CMatrix, power_budget: f64) -> Result<Self> {
        if !w.is_square() {
            return Err(Error::InvalidInput("covariance must be square".into()));
        }
        let asym = hermitian_defect(&w);
        if asym > 1e-10 * (1.0 + max_modulus(&w)) {
            return Err(Error::NotHermitian(asym));
        }
        let tr = trace_re(&w);
        let min_eig = crate::array_model::realify_unchecked(&w)
            .symmetric_eigenvalues()
            .min();
        if min_eig < -1e-8 * tr.abs().max(f64::MIN_POSITIVE) {
            return Err(Error::InvalidInput(format!(
                "covariance is not PSD (min eigenvalue {min_eig:.3e})"
            )));
        }
        if tr > power_budget * (1.0 + 1e-8) {
            return Err(Error::InvalidInput(format!(
                "covariance trace {tr} exceeds the budget {power_budget}"
            )));
        }
        Ok(Self { w })
    }

    /// Wrap without validation; used for intermediate algebra such as `W₁ + W₂`.
    pub fn new_unchecked(w: CMatrix) -> Self {
        Self { w }
    }

    /// `(P/N_T)·I`.
    pub fn isotropic(scene: &RadarScene) -> Self {
        let n = scene.n_tx;
        Self {
            w: CMatrix::identity(n, n) * C64::new(scene.power_budget / n as f64, 0.0),
        }
    }

    pub fn zeros(n_tx: usize) -> Self {
        Self {
            w: CMatrix::zeros(n_tx, n_tx),
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.w
    }

    pub fn dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn trace(&self) -> f64 {
        trace_re(&self.w)
    }
}

fn trace_re(w: &CMatrix) -> f64 {
    (0..w.nrows()).map(|i| w[(i, i)].re).sum()
}

fn max_modulus(w: &CMatrix) -> f64 {
    w.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub(crate) fn hermitian_defect(w: &CMatrix) -> f64 {
    (w - w.adjoint())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// The blocks of the block-diagonal posterior Fisher information.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PfimBlocks {
    pub f_theta_obs: f64,
    /// Multiplies `I₂` in the observation block of the reflection coefficient.
    pub f_alpha_obs_coeff: f64,
    pub f_theta_prior: f64,
    pub f_alpha_prior: Matrix2<f64>,
}

/// PCRB on the angle in rad².
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct PcrbValue {
    pub value: f64,
}

fn check_shapes(w: &TransmitCovariance, pdf: &GriddedPdf, gains: &[GainMatrix]) -> Result<()> {
    if gains.len() != pdf.grid().n_points() {
        return Err(Error::InvalidInput(format!(
            "{} gain matrices for a {}-point grid",
            gains.len(),
            pdf.grid().n_points()
        )));
    }
    if let Some(g) = gains.first() {
        if g.value.nrows() != w.dim() {
            return Err(Error::InvalidInput(
                "gain and covariance sizes differ".into(),
            ));
        }
    }
    Ok(())
}

/// `(2Lγ/σ²) Σ_k tr(G_k W) p_k Δθ`.
pub fn fim_obs_theta(
    w: &TransmitCovariance,
    pdf: &GriddedPdf,
    gains: &[GainMatrix],
    scene: &RadarScene,
) -> Result<f64> {
    check_shapes(w, pdf, gains)?;
    let dt = pdf.grid().spacing();
    let sum: f64 = gains
        .iter()
        .zip(pdf.density().iter())
        .map(|(g, p)| g.trace_with(w.matrix()) * p)
        .sum();
    Ok(scene.theta_scale() * sum * dt)
}

/// `(2L/σ²) Σ_k N_R aᴴ(θ_k) W a(θ_k) p_k Δθ`.
pub fn fim_obs_alpha_coeff(
    w: &TransmitCovariance,
    pdf: &GriddedPdf,
    scene: &RadarScene,
) -> Result<f64> {
    if w.dim() != scene.n_tx {
        return Err(Error::InvalidInput(
            "covariance size differs from N_T".into(),
        ));
    }
    let grid = pdf.grid();
    let mut sum = 0.0;
    for (&t, p) in grid.points().iter().zip(pdf.density().iter()) {
        let a = transmit_steering(t, scene.n_tx)?;
        sum += (a.adjoint() * w.matrix() * &a)[(0, 0)].re * p;
    }
    Ok(2.0 * scene.n_samples as f64 / scene.noise_power * scene.n_rx as f64 * sum * grid.spacing())
}

/// `Σ_k (Dp)_k² / p_k Δθ` with `p` floored before use.
pub fn fim_prior_theta(pdf: &GriddedPdf) -> Result<f64> {
    let grid = pdf.grid();
    let d = DifferenceMatrix::new(grid)?;
    let p = pdf.floored();
    let dp = d.apply(&p);
    Ok(dp.iter().zip(p.iter()).map(|(a, b)| a * a / b).sum::<f64>() * grid.spacing())
}

/// `(2/σ_α²)·I₂`.
pub fn fim_prior_alpha(scene: &RadarScene) -> Matrix2<f64> {
    Matrix2::identity() * (2.0 / scene.alpha_variance)
}

pub fn pfim_blocks(
    w: &TransmitCovariance,
    pdf: &GriddedPdf,
    gains: &[GainMatrix],
    scene: &RadarScene,
) -> Result<PfimBlocks> {
    Ok(PfimBlocks {
        f_theta_obs: fim_obs_theta(w, pdf, gains, scene)?,
        f_alpha_obs_coeff: fim_obs_alpha_coeff(w, pdf, scene)?,
        f_theta_prior: fim_prior_theta(pdf)?,
        f_alpha_prior: fim_prior_alpha(scene),
    })
}

/// `1 / (F_O^θθ + F_P^θθ)`.
pub fn pcrb_theta(
    w: &TransmitCovariance,
    pdf: &GriddedPdf,
    gains: &[GainMatrix],
    scene: &RadarScene,
) -> Result<PcrbValue> {
    let f = fim_obs_theta(w, pdf, gains, scene)? + fim_prior_theta(pdf)?;
    pcrb_from_information(f)
}

pub(crate) fn pcrb_from_information(f: f64) -> Result<PcrbValue> {
    if f > 0.0 && f.is_finite() {
        Ok(PcrbValue { value: 1.0 / f })
    } else {
        Err(Error::InfinitePcrb)
    }
}

/// Largest PCRB over `samples` and the index attaining it.
pub fn worst_case_pcrb_sampled(
    w: &TransmitCovariance,
    samples: &[GriddedPdf],
    gains: &[GainMatrix],
    scene: &RadarScene,
) -> Result<(PcrbValue, usize)> {
    use rayon::prelude::*;
    if samples.is_empty() {
        return Err(Error::InvalidInput("no samples".into()));
    }
    let values: Vec<f64> = samples
        .par_iter()
        .map(|p| pcrb_theta(w, p, gains, scene).map(|v| v.value))
        .collect::<Result<_>>()?;
    let (idx, value) =
        values
            .iter()
            .copied()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, v)| if v > acc.1 { (i, v) } else { acc },
            );
    Ok((PcrbValue { value }, idx))
}
