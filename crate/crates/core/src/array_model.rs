//! Half-wavelength ULA steering vectors, the target reflection matrix
//! `M(θ) = b(θ)aᴴ(θ)`, its angle derivative and the per-angle gain matrices.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;

use crate::prior_pdf::AngleGrid;
use crate::{CMatrix, CVector, Error, Result, C64};

/// Physical constants of the monostatic MIMO radar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadarScene {
    /// Transmit antennas `N_T`.
    pub n_tx: usize,
    /// Receive antennas `N_R`.
    pub n_rx: usize,
    /// Power budget `P` in watts.
    pub power_budget: f64,
    /// Noise power `σ²` in watts.
    pub noise_power: f64,
    /// Number of snapshots `L`.
    pub n_samples: usize,
    /// Second moment `γ` of the reflection coefficient.
    pub gamma: f64,
    /// Variance `σ_α²` of the CSCG reflection coefficient.
    pub alpha_variance: f64,
}

impl RadarScene {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidScene(m.to_string()));
        if self.n_tx == 0 || self.n_rx == 0 {
            return bad("antenna counts must be positive");
        }
        if !(self.power_budget > 0.0 && self.power_budget.is_finite()) {
            return bad("power budget must be positive");
        }
        if !(self.noise_power > 0.0 && self.noise_power.is_finite()) {
            return bad("noise power must be positive");
        }
        if self.n_samples < 2 {
            return bad("at least two snapshots are required");
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad("gamma must be positive");
        }
        if !(self.alpha_variance > 0.0 && self.alpha_variance.is_finite()) {
            return bad("alpha variance must be positive");
        }
        Ok(())
    }

    /// Scale `2Lγ/σ²` in front of the angle block of the observation Fisher information.
    pub fn theta_scale(&self) -> f64 {
        2.0 * self.n_samples as f64 * self.gamma / self.noise_power
    }
}

/// Transmit and receive steering vectors at one angle.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringPair {
    pub a: CVector,
    pub b: CVector,
}

/// Phase coefficient `−π(N−2p+1)/2` for element `p` (1-based) of an `n`-element ULA.
fn phase_coefficient(n: usize, p: usize) -> f64 {
    -PI * (n as f64 - 2.0 * p as f64 + 1.0) / 2.0
}

fn ula(n: usize, theta: f64) -> CVector {
    let s = theta.sin();
    CVector::from_fn(n, |i, _| {
        C64::from_polar(1.0, phase_coefficient(n, i + 1) * s)
    })
}

/// Derivative of [`ula`] with respect to `θ`.
fn ula_dot(n: usize, theta: f64) -> CVector {
    let (s, c) = theta.sin_cos();
    CVector::from_fn(n, |i, _| {
        let k = phase_coefficient(n, i + 1);
        C64::new(0.0, k * c) * C64::from_polar(1.0, k * s)
    })
}

fn check_angle(theta: f64) -> Result<()> {
    if theta.is_finite() && (-FRAC_PI_2..FRAC_PI_2).contains(&theta) {
        Ok(())
    } else {
        Err(Error::InvalidAngle(theta))
    }
}

pub fn steering(theta: f64, scene: &RadarScene) -> Result<SteeringPair> {
    check_angle(theta)?;
    Ok(SteeringPair {
        a: ula(scene.n_tx, theta),
        b: ula(scene.n_rx, theta),
    })
}

/// Transmit steering vector alone.
pub fn transmit_steering(theta: f64, n_tx: usize) -> Result<CVector> {
    check_angle(theta)?;
    Ok(ula(n_tx, theta))
}

/// `M(θ) = b(θ)aᴴ(θ)`, an `N_R × N_T` rank-one matrix.
pub fn m_matrix(theta: f64, scene: &RadarScene) -> Result<CMatrix> {
    let sp = steering(theta, scene)?;
    Ok(&sp.b * sp.a.adjoint())
}

/// `Ṁ(θ) = ḃaᴴ + bȧᴴ`.
pub fn m_dot_matrix(theta: f64, scene: &RadarScene) -> Result<CMatrix> {
    check_angle(theta)?;
    let a = ula(scene.n_tx, theta);
    let b = ula(scene.n_rx, theta);
    let a_dot = ula_dot(scene.n_tx, theta);
    let b_dot = ula_dot(scene.n_rx, theta);
    Ok(&b_dot * a.adjoint() + &b * a_dot.adjoint())
}

/// Hermitian PSD `N_T × N_T` matrix, either `ṀᴴṀ` or `MᴴM` at one angle.
#[derive(Debug, Clone, PartialEq)]
pub struct GainMatrix {
    pub value: CMatrix,
}

impl GainMatrix {
    /// `Re tr(G W)` for Hermitian `W`; the imaginary part vanishes for Hermitian pairs.
    pub fn trace_with(&self, w: &CMatrix) -> f64 {
        let n = self.value.nrows();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                let g = self.value[(i, j)];
                let x = w[(j, i)];
                acc += g.re * x.re - g.im * x.im;
            }
        }
        acc
    }

    /// Real symmetric `2n × 2n` embedding `[[Re, −Im], [Im, Re]]`.
    pub fn realified(&self) -> DMatrix<f64> {
        realify_unchecked(&self.value)
    }
}

pub(crate) fn realify_unchecked(h: &CMatrix) -> DMatrix<f64> {
    let n = h.nrows();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = h[(i, j)];
            out[(i, j)] = z.re;
            out[(i + n, j + n)] = z.re;
            out[(i, j + n)] = -z.im;
            out[(i + n, j)] = z.im;
        }
    }
    out
}

fn gram(m: &CMatrix) -> CMatrix {
    let g = m.adjoint() * m;
    // Force exact Hermitian symmetry.
    (&g + g.adjoint()).scale(0.5)
}

/// `ṀᴴṀ` at every grid point.
pub fn gain_matrices(grid: &AngleGrid, scene: &RadarScene) -> Vec<GainMatrix> {
    grid.points()
        .iter()
        .map(|&t| GainMatrix {
            value: gram(&m_dot_matrix(t, scene).expect("grid points lie in the domain")),
        })
        .collect()
}

/// `MᴴM` at every grid point.
pub fn reflection_gain_matrices(grid: &AngleGrid, scene: &RadarScene) -> Vec<GainMatrix> {
    grid.points()
        .iter()
        .map(|&t| GainMatrix {
            value: gram(&m_matrix(t, scene).expect("grid points lie in the domain")),
        })
        .collect()
}
