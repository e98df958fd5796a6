//! Uniform angle grid, gridded densities, Gaussian mixtures and the sampler
//! that draws "real" priors inside the energy ball around a nominal prior.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::{Read, Write};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::{Error, Result};

/// Floor applied to densities before any division by them.
pub const DENSITY_FLOOR: f64 = 1e-12;

/// Cell-midpoint discretization of `[−π/2, π/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleGrid {
    n_points: usize,
    spacing: f64,
    points: Vec<f64>,
}

impl AngleGrid {
    pub fn new(n_points: usize) -> Result<Self> {
        if n_points == 0 {
            return Err(Error::InvalidInput(
                "angle grid needs at least one point".into(),
            ));
        }
        let spacing = PI / n_points as f64;
        let points = (0..n_points)
            .map(|k| -FRAC_PI_2 + (k as f64 + 0.5) * spacing)
            .collect();
        Ok(Self {
            n_points,
            spacing,
            points,
        })
    }

    /// Grid whose spacing is the closest to `spacing` that divides `π` evenly.
    pub fn with_spacing(spacing: f64) -> Result<Self> {
        if !(spacing > 0.0 && spacing <= PI) {
            return Err(Error::InvalidInput(format!(
                "grid spacing {spacing} out of range"
            )));
        }
        Self::new(((PI / spacing).round() as usize).max(1))
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn points_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.points)
    }
}

/// Probability density sampled at the grid points (units 1/rad).
#[derive(Debug, Clone, PartialEq)]
pub struct GriddedPdf {
    grid: AngleGrid,
    density: DVector<f64>,
}

impl GriddedPdf {
    /// Wrap a density that is already nonnegative and normalized.
    pub fn new(grid: AngleGrid, density: DVector<f64>) -> Result<Self> {
        if density.len() != grid.n_points() {
            return Err(Error::InvalidInput(format!(
                "density has {} entries for a {}-point grid",
                density.len(),
                grid.n_points()
            )));
        }
        if let Some(v) = density.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidInput(format!(
                "density entry {v} is not a finite nonnegative number"
            )));
        }
        let mass = density.sum() * grid.spacing();
        if (mass - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "density integrates to {mass}, not 1"
            )));
        }
        Ok(Self { grid, density })
    }

    /// Rescale a nonnegative vector so that it integrates to one.
    pub fn normalized(grid: AngleGrid, density: DVector<f64>) -> Result<Self> {
        let mass = density.sum() * grid.spacing();
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::InvalidInput("density has no mass".into()));
        }
        Self::new(grid, density / mass)
    }

    /// Constant density `1/π`.
    pub fn uniform(grid: AngleGrid) -> Self {
        let n = grid.n_points();
        let density = DVector::from_element(n, 1.0 / (n as f64 * grid.spacing()));
        Self { grid, density }
    }

    pub fn grid(&self) -> &AngleGrid {
        &self.grid
    }

    pub fn density(&self) -> &DVector<f64> {
        &self.density
    }

    pub fn into_density(self) -> DVector<f64> {
        self.density
    }

    /// Density with every entry raised to at least [`DENSITY_FLOOR`].
    pub fn floored(&self) -> DVector<f64> {
        self.density.map(|v| v.max(DENSITY_FLOOR))
    }

    /// Two-column CSV `theta_radians,density`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let wrap = |e: csv::Error| Error::InvalidInput(format!("csv write failed: {e}"));
        w.write_record(["theta_radians", "density"]).map_err(wrap)?;
        for (t, p) in self.grid.points().iter().zip(self.density.iter()) {
            w.write_record([format!("{t:.17e}"), format!("{p:.17e}")])
                .map_err(wrap)?;
        }
        w.flush()
            .map_err(|e| Error::InvalidInput(format!("csv write failed: {e}")))?;
        Ok(())
    }

    /// Inverse of [`GriddedPdf::write_csv`]. The grid is inferred from the row
    /// count and the angle column must match its midpoints.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        const CTX: &str = "pdf csv";
        let mut r = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(input);
        let headers = r
            .headers()
            .map_err(|e| Error::parse(CTX, 1, e.to_string()))?
            .clone();
        if headers.len() != 2 || &headers[0] != "theta_radians" || &headers[1] != "density" {
            return Err(Error::parse(
                CTX,
                1,
                "expected header `theta_radians,density`",
            ));
        }
        let mut thetas = Vec::new();
        let mut values = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| Error::parse(CTX, line, e.to_string()))?;
            if rec.len() != 2 {
                return Err(Error::parse(CTX, line, "expected two fields"));
            }
            let num = |s: &str| -> Result<f64> {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::parse(CTX, line, format!("`{s}`: {e}")))
            };
            thetas.push(num(&rec[0])?);
            values.push(num(&rec[1])?);
        }
        if thetas.is_empty() {
            return Err(Error::parse(CTX, 2, "no data rows"));
        }
        let grid = AngleGrid::new(thetas.len())?;
        for (k, (t, g)) in thetas.iter().zip(grid.points()).enumerate() {
            if (t - g).is_nan() || (t - g).abs() > 1e-9 {
                return Err(Error::parse(
                    CTX,
                    k + 2,
                    format!("angle {t} does not match grid midpoint {g}"),
                ));
            }
        }
        Self::new(grid, DVector::from_vec(values))
    }
}

/// Discretized perturbation `e = p − p̄` together with its energy `Σe²Δθ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorVector {
    pub e: DVector<f64>,
    pub energy: f64,
}

impl ErrorVector {
    pub fn new(e: DVector<f64>, grid: &AngleGrid) -> Self {
        let energy = e.norm_squared() * grid.spacing();
        Self { e, energy }
    }

    pub fn zeros(grid: &AngleGrid) -> Self {
        Self::new(DVector::zeros(grid.n_points()), grid)
    }

    /// `Σ e Δθ`, zero for a valid perturbation.
    pub fn integral(&self, grid: &AngleGrid) -> f64 {
        self.e.sum() * grid.spacing()
    }

    /// Both uncertainty-set conditions at radius `delta`.
    pub fn is_feasible(&self, grid: &AngleGrid, delta: f64) -> bool {
        self.integral(grid).abs() <= 1e-9 && self.energy <= delta * delta
    }
}

pub fn error_energy(e: &ErrorVector, grid: &AngleGrid) -> f64 {
    e.e.norm_squared() * grid.spacing()
}

/// Finite Gaussian mixture on the angle axis.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

impl GaussianMixture {
    pub fn new(weights: Vec<f64>, means: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        let m = Self {
            weights,
            means,
            variances,
        };
        m.validate()?;
        Ok(m)
    }

    /// Two targets at ∓0.7 rad: a narrow one with weight 0.6 and a wider one with weight 0.4.
    pub fn two_target() -> Self {
        Self {
            weights: vec![0.6, 0.4],
            means: vec![-0.7, 0.7],
            variances: vec![1e-3, 10f64.powf(-2.8)],
        }
    }

    /// Single component.
    pub fn single(mean: f64, variance: f64) -> Self {
        Self {
            weights: vec![1.0],
            means: vec![mean],
            variances: vec![variance],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.weights.len();
        if k == 0 || self.means.len() != k || self.variances.len() != k {
            return Err(Error::InvalidInput(
                "mixture needs equally many weights, means and variances".into(),
            ));
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidInput(
                "mixture weights must be nonnegative".into(),
            ));
        }
        if (self.weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput("mixture weights must sum to 1".into()));
        }
        if self.means.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidInput("mixture means must be finite".into()));
        }
        if self.variances.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidInput(
                "mixture variances must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn density(&self, theta: f64) -> f64 {
        self.weights
            .iter()
            .zip(&self.means)
            .zip(&self.variances)
            .map(|((w, m), v)| {
                let z = theta - m;
                w * (-0.5 * z * z / v).exp() / (2.0 * PI * v).sqrt()
            })
            .sum()
    }
}

/// Evaluate `mix` at the grid points and renormalize onto the angle domain.
///
/// Truncation is judged against the same components centred at 0, so a very
/// wide prior is accepted while one whose means sit far outside is not.
pub fn discretize_mixture(mix: &GaussianMixture, grid: &AngleGrid) -> Result<GriddedPdf> {
    mix.validate()?;
    let raw = DVector::from_iterator(
        grid.n_points(),
        grid.points().iter().map(|&t| mix.density(t)),
    );
    let centred = GaussianMixture {
        means: vec![0.0; mix.n_components()],
        ..mix.clone()
    };
    let reference: f64 = grid.points().iter().map(|&t| centred.density(t)).sum();
    let mass = raw.sum() / reference;
    if mass.is_nan() || mass < 0.5 {
        return Err(Error::TruncationDominance { mass });
    }
    GriddedPdf::normalized(grid.clone(), raw)
}

/// How candidate "real" priors are drawn around a nominal mixture.
///
/// Every nominal component is kept with jittered weight, mean and variance,
/// and one extra roaming component is added anywhere in the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationScheme {
    pub nominal: GaussianMixture,
    /// Standard deviation of the additive mean jitter (rad).
    pub mean_jitter: f64,
    /// Standard deviation of the log-scale jitter applied to weights and variances.
    pub log_jitter: f64,
    /// Roaming component weight is uniform on `[0, roaming_weight_max]` before renormalization.
    pub roaming_weight_max: f64,
    /// Roaming mean is uniform on `[−roaming_mean_max, roaming_mean_max]`.
    pub roaming_mean_max: f64,
    /// Roaming variance is log-uniform on this interval.
    pub roaming_variance: (f64, f64),
    /// The shrunken sample lands at energy `δ²·f` with `f` uniform on `[min_energy_fraction, 1]`.
    pub min_energy_fraction: f64,
}

impl PerturbationScheme {
    pub fn around(nominal: GaussianMixture) -> Self {
        Self {
            nominal,
            mean_jitter: 0.05,
            log_jitter: 0.3,
            roaming_weight_max: 0.3,
            roaming_mean_max: 1.2,
            roaming_variance: (1e-3, 1e-1),
            min_energy_fraction: 0.6,
        }
    }

    fn draw_mixture<R: Rng>(&self, rng: &mut R) -> GaussianMixture {
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let unit = Uniform::new(0.0, 1.0).expect("unit interval");
        let mut weights = Vec::with_capacity(self.nominal.n_components() + 1);
        let mut means = Vec::with_capacity(weights.capacity());
        let mut variances = Vec::with_capacity(weights.capacity());
        for k in 0..self.nominal.n_components() {
            let w = self.nominal.weights[k] * (self.log_jitter * normal.sample(rng)).exp();
            let m = (self.nominal.means[k] + self.mean_jitter * normal.sample(rng))
                .clamp(-FRAC_PI_2, FRAC_PI_2);
            let v = self.nominal.variances[k] * (self.log_jitter * normal.sample(rng)).exp();
            weights.push(w);
            means.push(m);
            variances.push(v);
        }
        weights.push(self.roaming_weight_max * unit.sample(rng));
        means.push(self.roaming_mean_max * (2.0 * unit.sample(rng) - 1.0));
        let (lo, hi) = self.roaming_variance;
        variances.push((lo.ln() + (hi.ln() - lo.ln()) * unit.sample(rng)).exp());
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        GaussianMixture {
            weights,
            means,
            variances,
        }
    }
}

/// Draw one real prior within energy distance `delta` of `p_bar`.
///
/// A candidate mixture is discretized and then pulled toward `p_bar` along the
/// segment `(1 − s)p̄ + s·p`, which keeps it a valid density. The energy is
/// `s²` times the candidate's, so `s` is set in closed form.
pub fn sample_real_pdf_with<R: Rng>(
    p_bar: &GriddedPdf,
    delta: f64,
    scheme: &PerturbationScheme,
    rng: &mut R,
) -> Result<(GriddedPdf, ErrorVector)> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "radius {delta} must be nonnegative"
        )));
    }
    let grid = p_bar.grid();
    if delta == 0.0 {
        return Ok((p_bar.clone(), ErrorVector::zeros(grid)));
    }
    let unit = Uniform::new(0.0, 1.0).expect("unit interval");
    for _ in 0..1000 {
        let mix = scheme.draw_mixture(rng);
        let Ok(candidate) = discretize_mixture(&mix, grid) else {
            continue;
        };
        let direction = candidate.density() - p_bar.density();
        let full = direction.norm_squared() * grid.spacing();
        if full == 0.0 {
            continue;
        }
        let f = scheme.min_energy_fraction + (1.0 - scheme.min_energy_fraction) * unit.sample(rng);
        let s = ((delta * f.sqrt()) / full.sqrt() * (1.0 - 1e-9)).min(1.0);
        let density = (p_bar.density() + &direction * s).map(|v| v.max(0.0));
        // Renormalize against the last ulp of drift so the result is a valid density.
        let p = GriddedPdf::normalized(grid.clone(), density)?;
        let e = ErrorVector::new(p.density() - p_bar.density(), grid);
        if e.energy <= delta * delta {
            return Ok((p, e));
        }
    }
    Err(Error::InvalidInput(
        "perturbation sampler failed to produce a candidate".into(),
    ))
}

/// [`sample_real_pdf_with`] driven by its own seeded generator.
pub fn sample_real_pdf(
    p_bar: &GriddedPdf,
    delta: f64,
    scheme: &PerturbationScheme,
    seed: u64,
) -> Result<(GriddedPdf, ErrorVector)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_real_pdf_with(p_bar, delta, scheme, &mut rng)
}

/// `count` independent samples; sample `i` uses stream `i` of the seeded generator.
pub fn sample_real_pdfs(
    p_bar: &GriddedPdf,
    delta: f64,
    scheme: &PerturbationScheme,
    seed: u64,
    count: usize,
) -> Result<Vec<(GriddedPdf, ErrorVector)>> {
    use rayon::prelude::*;
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            sample_real_pdf_with(p_bar, delta, scheme, &mut rng)
        })
        .collect()
}
