//! Quadratic surrogate of the prior Fisher information in the prior error `e`,
//! the sensing map `g(W)` and the zero-sum null-space basis.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::array_model::{GainMatrix, RadarScene};
use crate::fisher_pcrb::TransmitCovariance;
use crate::prior_pdf::{AngleGrid, ErrorVector, GriddedPdf};
use crate::{Error, Result};

/// First-derivative stencil on the angle grid: central differences inside,
/// one-sided first-order differences on the two boundary rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DifferenceMatrix {
    n: usize,
    spacing: f64,
}

impl DifferenceMatrix {
    pub fn new(grid: &AngleGrid) -> Result<Self> {
        let n = grid.n_points();
        if n < 3 {
            return Err(Error::GridTooCoarse(n));
        }
        Ok(Self {
            n,
            spacing: grid.spacing(),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `D v` in `O(N)`.
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let (n, h) = (self.n, self.spacing);
        assert_eq!(v.len(), n);
        DVector::from_fn(n, |k, _| match k {
            0 => (v[1] - v[0]) / h,
            k if k == n - 1 => (v[n - 1] - v[n - 2]) / h,
            k => (v[k + 1] - v[k - 1]) / (2.0 * h),
        })
    }

    /// `Dᵀ v` in `O(N)`.
    pub fn apply_transpose(&self, v: &DVector<f64>) -> DVector<f64> {
        let (n, h) = (self.n, self.spacing);
        assert_eq!(v.len(), n);
        let mut out = DVector::zeros(n);
        out[0] -= v[0] / h;
        out[1] += v[0] / h;
        out[n - 2] -= v[n - 1] / h;
        out[n - 1] += v[n - 1] / h;
        for k in 1..n - 1 {
            out[k - 1] -= 0.5 * v[k] / h;
            out[k + 1] += 0.5 * v[k] / h;
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let (n, h) = (self.n, self.spacing);
        let mut d = DMatrix::zeros(n, n);
        d[(0, 0)] = -1.0 / h;
        d[(0, 1)] = 1.0 / h;
        d[(n - 1, n - 2)] = -1.0 / h;
        d[(n - 1, n - 1)] = 1.0 / h;
        for k in 1..n - 1 {
            d[(k, k - 1)] = -0.5 / h;
            d[(k, k + 1)] = 0.5 / h;
        }
        d
    }
}

pub fn difference_matrix(grid: &AngleGrid) -> Result<DifferenceMatrix> {
    DifferenceMatrix::new(grid)
}

/// Helmert basis of `{x : 1ᵀx = 0}`, an `n × (n−1)` matrix with orthonormal columns.
pub fn nullspace_basis(n: usize) -> Result<DMatrix<f64>> {
    if n < 2 {
        return Err(Error::InvalidInput("null-space basis needs n >= 2".into()));
    }
    let mut b = DMatrix::zeros(n, n - 1);
    for j in 1..n {
        let s = 1.0 / ((j * (j + 1)) as f64).sqrt();
        for i in 0..j {
            b[(i, j - 1)] = s;
        }
        b[(j, j - 1)] = -(j as f64) * s;
    }
    Ok(b)
}

/// Spectrum of the reduced curvature `Ā = BᵀQ_PB`, ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSpectrum {
    pub eigenvalues: DVector<f64>,
    /// Column `k` is the eigenvector of `eigenvalues[k]`.
    pub eigenvectors: DMatrix<f64>,
}

/// Precomputed surrogate for one nominal prior, scene and radius.
#[derive(Debug, Clone)]
pub struct QuadraticPcrbModel {
    pub q_p: DMatrix<f64>,
    pub f_p: DVector<f64>,
    pub c_p: f64,
    pub basis: DMatrix<f64>,
    pub gains: Arc<Vec<GainMatrix>>,
    /// `2LγΔθ/σ²`.
    pub sensing_scale: f64,
    pub p_bar: GriddedPdf,
    pub delta: f64,
    /// `δ/√Δθ`.
    pub ball_radius: f64,
    /// `R` with `Q_P = RᵀR`.
    r_factor: Arc<DMatrix<f64>>,
    spectrum: Arc<ReducedSpectrum>,
}

/// `R = √Δθ·diag(p)^{-1/2}·(D − diag(Dp/p))`, so that `RᵀR` reproduces `Q_P`.
fn curvature_factor(
    d: &DMatrix<f64>,
    p: &DVector<f64>,
    dp: &DVector<f64>,
    dt: f64,
) -> DMatrix<f64> {
    let mut r = d.clone();
    for k in 0..p.len() {
        r[(k, k)] -= dp[k] / p[k];
    }
    for k in 0..p.len() {
        let s = (dt / p[k]).sqrt();
        r.row_mut(k).scale_mut(s);
    }
    r
}

/// Eigen-decomposition of `(RB)ᵀ(RB)` through the SVD of `RB`. Squaring singular
/// values keeps the small eigenvalues accurate, which a dense symmetric
/// eigensolver on the assembled product does not at this conditioning.
fn reduced_spectrum(rb: DMatrix<f64>) -> ReducedSpectrum {
    let m = rb.ncols();
    let svd = rb.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let eigenvalues =
        DVector::from_iterator(m, order.iter().map(|&k| svd.singular_values[k].powi(2)));
    let mut eigenvectors = DMatrix::zeros(m, m);
    for (c, &k) in order.iter().enumerate() {
        eigenvectors.set_column(c, &v_t.row(k).transpose());
    }
    ReducedSpectrum {
        eigenvalues,
        eigenvectors,
    }
}

pub fn build_quadratic_model(
    p_bar: &GriddedPdf,
    gains: Vec<GainMatrix>,
    scene: &RadarScene,
    delta: f64,
) -> Result<QuadraticPcrbModel> {
    scene.validate()?;
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "radius {delta} must be nonnegative"
        )));
    }
    let grid = p_bar.grid();
    let n = grid.n_points();
    if gains.len() != n {
        return Err(Error::InvalidInput(format!(
            "{} gain matrices for a {n}-point grid",
            gains.len()
        )));
    }
    if gains.iter().any(|g| g.value.nrows() != scene.n_tx) {
        return Err(Error::InvalidInput(
            "gain matrix size differs from N_T".into(),
        ));
    }
    let dt = grid.spacing();
    let diff = DifferenceMatrix::new(grid)?;
    let d = diff.to_dense();
    let p = p_bar.floored();
    let v = diff.apply(&p);

    let sigma1 = p.map(|x| 1.0 / x);
    let sigma2 = p.map(|x| 1.0 / (x * x));
    let sigma3 = p.map(|x| 1.0 / (x * x * x));

    // DᵀΣ₁D
    let mut s1d = d.clone();
    for k in 0..n {
        s1d.row_mut(k).scale_mut(sigma1[k]);
    }
    let mut q = d.transpose() * &s1d;
    // − (Σ₂V₀D + DᵀV₀Σ₂)
    let mut s2v0d = d.clone();
    for k in 0..n {
        s2v0d.row_mut(k).scale_mut(sigma2[k] * v[k]);
    }
    q -= &s2v0d;
    q -= s2v0d.transpose();
    // + Σ₃V₀²
    for k in 0..n {
        q[(k, k)] += sigma3[k] * v[k] * v[k];
    }
    q *= dt;
    let q_p = (&q + q.transpose()) * 0.5;

    let s1v = v.component_mul(&sigma1);
    let f_p = (d.transpose() * &s1v * 2.0 - v.component_mul(&v).component_mul(&sigma2)) * dt;
    let c_p = v.dot(&s1v) * dt;

    let basis = nullspace_basis(n)?;
    let r_factor = curvature_factor(&d, &p, &v, dt);
    let spectrum = reduced_spectrum(&r_factor * &basis);

    Ok(QuadraticPcrbModel {
        q_p,
        f_p,
        c_p,
        basis,
        gains: Arc::new(gains),
        sensing_scale: scene.theta_scale() * dt,
        p_bar: p_bar.clone(),
        delta,
        ball_radius: delta / dt.sqrt(),
        r_factor: Arc::new(r_factor),
        spectrum: Arc::new(spectrum),
    })
}

impl QuadraticPcrbModel {
    pub fn grid(&self) -> &AngleGrid {
        self.p_bar.grid()
    }

    pub fn n_points(&self) -> usize {
        self.p_bar.grid().n_points()
    }

    pub fn n_tx(&self) -> usize {
        self.gains.first().map_or(0, |g| g.value.nrows())
    }

    /// Same model at another radius; the δ-independent parts are shared.
    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "radius {delta} must be nonnegative"
            )));
        }
        let mut m = self.clone();
        m.delta = delta;
        m.ball_radius = delta / self.grid().spacing().sqrt();
        Ok(m)
    }

    /// `R` with `Q_P = RᵀR`.
    pub fn curvature_factor(&self) -> &DMatrix<f64> {
        &self.r_factor
    }

    /// Eigen-decomposition of `BᵀQ_PB`.
    pub fn reduced_spectrum(&self) -> &ReducedSpectrum {
        &self.spectrum
    }

    /// `p̄ᵀg(W) + C_P`, the nominal posterior Fisher information.
    pub fn nominal_information(&self, w: &TransmitCovariance) -> f64 {
        self.p_bar.density().dot(&g_vector(self, w)) + self.c_p
    }

    /// `A = sensing_scale·Σ_k p̄_k G_k`, so that `p̄ᵀg(W) = tr(A W)`.
    pub fn nominal_gain(&self) -> crate::CMatrix {
        let n = self.n_tx();
        let mut a = crate::CMatrix::zeros(n, n);
        for (g, p) in self.gains.iter().zip(self.p_bar.density().iter()) {
            a += &g.value * crate::C64::new(p * self.sensing_scale, 0.0);
        }
        (&a + a.adjoint()).scale(0.5)
    }

    /// Constraint value `eᵀQ_Pe + (f_P + g)ᵀe + C_P + p̄ᵀg` of the surrogate problem.
    pub fn constraint_value(&self, e: &DVector<f64>, g: &DVector<f64>) -> f64 {
        e.dot(&(&self.q_p * e)) + (&self.f_p + g).dot(e) + self.c_p + self.p_bar.density().dot(g)
    }

    /// Same value written in the null-space coordinates `e = Bu`.
    pub fn reduced_constraint_value(&self, u: &DVector<f64>, g: &DVector<f64>) -> f64 {
        let bu = &self.basis * u;
        let ru = &*self.r_factor * &bu;
        ru.norm_squared() + (&self.f_p + g).dot(&bu) + self.c_p + self.p_bar.density().dot(g)
    }

    /// Write `Q_P`, `f_P`, `C_P`, `B` and `p̄` as CSV files into `dir`.
    pub fn export_csv(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_matrix(&dir.join("q_p.csv"), &self.q_p)?;
        write_matrix(&dir.join("basis.csv"), &self.basis)?;
        write_matrix(
            &dir.join("f_p.csv"),
            &DMatrix::from_column_slice(self.f_p.len(), 1, self.f_p.as_slice()),
        )?;
        write_matrix(&dir.join("c_p.csv"), &DMatrix::from_element(1, 1, self.c_p))?;
        let path = dir.join("p_bar.csv");
        let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        self.p_bar.write_csv(file)
    }
}

fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut out = String::with_capacity(m.nrows() * m.ncols() * 24);
    for i in 0..m.nrows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:.17e}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// `eᵀQ_Pe + f_Pᵀe + C_P`.
pub fn prior_fisher_quadratic(model: &QuadraticPcrbModel, e: &ErrorVector) -> Result<f64> {
    if e.e.len() != model.n_points() {
        return Err(Error::InvalidInput(
            "error vector length differs from the grid".into(),
        ));
    }
    Ok(e.e.dot(&(&model.q_p * &e.e)) + model.f_p.dot(&e.e) + model.c_p)
}

/// `g_n = sensing_scale·tr(G_n W)`.
pub fn g_vector(model: &QuadraticPcrbModel, w: &TransmitCovariance) -> DVector<f64> {
    DVector::from_iterator(
        model.gains.len(),
        model
            .gains
            .iter()
            .map(|g| model.sensing_scale * g.trace_with(w.matrix())),
    )
}
