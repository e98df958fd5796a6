//! Configuration-driven experiments: δ-sweeps, radiated power patterns and the
//! robust-versus-enumeration timing comparison, with CSV persistence.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use log::{info, warn};
use nalgebra::DVector;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array_model::{gain_matrices, transmit_steering, GainMatrix, RadarScene};
use crate::fisher_pcrb::{worst_case_pcrb_sampled, TransmitCovariance};
use crate::prior_pdf::{
    discretize_mixture, sample_real_pdfs, AngleGrid, GaussianMixture, GriddedPdf,
    PerturbationScheme,
};
use crate::quad_model::{build_quadratic_model, QuadraticPcrbModel};
use crate::robust_opt::{
    sample_ball_errors, solve_enumeration, solve_nominal, solve_robust, trust_region_worst_case,
    RobustSolution, SolverSettings,
};
use crate::{Error, Result, C64};

/// The configuration file shipped with the crate; every value is the default.
pub const DEFAULT_CONFIG: &str = include_str!("../config/default.toml");

/// `10^((dBm − 30)/10)` watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Robust,
    Nominal,
    Enumeration,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Robust, Scheme::Nominal, Scheme::Enumeration];

    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::Robust => "robust",
            Scheme::Nominal => "nominal",
            Scheme::Enumeration => "enumeration",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                Error::InvalidInput(format!(
                    "unknown scheme `{s}` (robust, nominal, enumeration)"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub n_tx: usize,
    pub n_rx: usize,
    pub power_dbm: f64,
    pub noise_dbm: f64,
    pub snapshots: usize,
    /// Second moment of the reflection coefficient.
    pub gamma: f64,
    pub alpha_variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureConfig {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Desk-scale spacing (rad).
    pub spacing: f64,
    /// Spacing used under `--paper-scale`.
    pub paper_spacing: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub deltas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationConfig {
    /// Real-PDF realizations per δ, shared by every scheme.
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnumerationConfig {
    /// Number of enumerated errors `M`.
    pub samples: usize,
    /// Draw errors on the sphere instead of inside the ball.
    pub boundary_only: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeampatternConfig {
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingConfig {
    pub delta: f64,
    /// Each solve is repeated and the median time kept.
    pub repeats: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Root seed; every random stream is derived from it.
    pub seed: u64,
    pub output_dir: PathBuf,
    pub schemes: Vec<Scheme>,
    /// Use `grid.paper_spacing` instead of `grid.spacing`.
    #[serde(default)]
    pub paper_scale: bool,
    pub scene: SceneConfig,
    pub prior: MixtureConfig,
    pub grid: GridConfig,
    pub sweep: SweepConfig,
    pub evaluation: EvaluationConfig,
    pub enumeration: EnumerationConfig,
    pub beampattern: BeampatternConfig,
    pub timing: TimingConfig,
}

fn grid_points(spacing: f64, field: &str) -> Result<usize> {
    let invalid = |m: String| Error::Config {
        path: field.to_string(),
        message: m,
    };
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(invalid(format!("spacing {spacing} must be positive")));
    }
    let ratio = std::f64::consts::PI / spacing;
    let n = ratio.round();
    if n < 3.0 {
        return Err(invalid(format!(
            "spacing {spacing} leaves fewer than 3 grid points"
        )));
    }
    if (ratio - n).abs() > 1e-3 * n {
        return Err(invalid(format!(
            "π/{spacing} = {ratio} is not an integer within rounding"
        )));
    }
    Ok(n as usize)
}

impl ExperimentConfig {
    pub fn default_config() -> Self {
        Self::from_toml_str(DEFAULT_CONFIG).expect("shipped default config is valid")
    }

    /// Parse and validate; errors name the offending field.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::Config {
            path: String::new(),
            message: e.to_string(),
        })?;
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
            path: e.path().to_string(),
            message: e.inner().message().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config {
            path: String::new(),
            message: e.to_string(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |path: &str, message: String| {
            Err(Error::Config {
                path: path.to_string(),
                message,
            })
        };
        if self.sweep.deltas.is_empty() {
            return fail("sweep.deltas", "at least one δ is required".into());
        }
        if self
            .sweep
            .deltas
            .iter()
            .any(|d| !(*d >= 0.0 && d.is_finite()))
        {
            return fail(
                "sweep.deltas",
                "δ values must be finite and nonnegative".into(),
            );
        }
        if self.sweep.deltas.windows(2).any(|w| w[0] > w[1]) {
            return fail("sweep.deltas", "δ values must be sorted ascending".into());
        }
        if self.evaluation.samples == 0 {
            return fail(
                "evaluation.samples",
                "sample count must be at least 1".into(),
            );
        }
        if self.enumeration.samples == 0 {
            return fail(
                "enumeration.samples",
                "sample count must be at least 1".into(),
            );
        }
        if self.timing.repeats == 0 {
            return fail("timing.repeats", "at least one repeat is required".into());
        }
        for (path, d) in [
            ("beampattern.delta", self.beampattern.delta),
            ("timing.delta", self.timing.delta),
        ] {
            if !(d >= 0.0 && d.is_finite()) {
                return fail(path, format!("δ = {d} must be finite and nonnegative"));
            }
        }
        if self.schemes.is_empty() {
            return fail("schemes", "at least one scheme is required".into());
        }
        grid_points(self.grid.spacing, "grid.spacing")?;
        grid_points(self.grid.paper_spacing, "grid.paper_spacing")?;
        self.scene().map_err(|e| Error::Config {
            path: "scene".into(),
            message: e.to_string(),
        })?;
        self.mixture().map_err(|e| Error::Config {
            path: "prior".into(),
            message: e.to_string(),
        })?;
        Ok(())
    }

    pub fn scene(&self) -> Result<RadarScene> {
        let s = &self.scene;
        let scene = RadarScene {
            n_tx: s.n_tx,
            n_rx: s.n_rx,
            power_budget: dbm_to_watts(s.power_dbm),
            noise_power: dbm_to_watts(s.noise_dbm),
            n_samples: s.snapshots,
            gamma: s.gamma,
            alpha_variance: s.alpha_variance,
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn mixture(&self) -> Result<GaussianMixture> {
        GaussianMixture::new(
            self.prior.weights.clone(),
            self.prior.means.clone(),
            self.prior.variances.clone(),
        )
    }

    /// The grid in use: desk scale, or paper scale when `paper_scale` is set.
    pub fn grid(&self) -> Result<AngleGrid> {
        let (spacing, field) = if self.paper_scale {
            (self.grid.paper_spacing, "grid.paper_spacing")
        } else {
            (self.grid.spacing, "grid.spacing")
        };
        AngleGrid::new(grid_points(spacing, field)?)
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ExperimentConfig::from_toml_str(&text).map_err(|e| match e {
        Error::Config {
            path: field,
            message,
        } => Error::Config {
            path: if field.is_empty() {
                path.display().to_string()
            } else {
                format!("{}: {field}", path.display())
            },
            message,
        },
        other => other,
    })
}

/// Independent seed for `(purpose, index)` derived from the root seed.
pub fn derive_seed(root: u64, purpose: Purpose, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream(((purpose as u64) << 32) | index);
    rng.next_u64()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Evaluation = 1,
    Enumeration = 2,
}

/// Shared, δ-independent inputs of every experiment.
pub struct ExperimentContext {
    pub config: ExperimentConfig,
    pub scene: RadarScene,
    pub grid: AngleGrid,
    pub mixture: GaussianMixture,
    pub p_bar: GriddedPdf,
    pub gains: Vec<GainMatrix>,
    base: QuadraticPcrbModel,
}

impl ExperimentContext {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let scene = config.scene()?;
        let grid = config.grid()?;
        let mixture = config.mixture()?;
        let p_bar = discretize_mixture(&mixture, &grid)?;
        let gains = gain_matrices(&grid, &scene);
        let base = build_quadratic_model(&p_bar, gains.clone(), &scene, 0.0)?;
        Ok(Self {
            config: config.clone(),
            scene,
            grid,
            mixture,
            p_bar,
            gains,
            base,
        })
    }

    pub fn model(&self, delta: f64) -> Result<QuadraticPcrbModel> {
        self.base.with_delta(delta)
    }

    /// Solve one scheme at one radius; the enumeration errors come from the
    /// enumeration stream of `delta_index`.
    pub fn solve(
        &self,
        scheme: Scheme,
        model: &QuadraticPcrbModel,
        delta_index: usize,
    ) -> Result<RobustSolution> {
        match scheme {
            Scheme::Robust => solve_robust(model, &self.scene),
            Scheme::Nominal => solve_nominal(model, &self.scene),
            Scheme::Enumeration => {
                let seed = derive_seed(self.config.seed, Purpose::Enumeration, delta_index as u64);
                let errors = sample_ball_errors(
                    model,
                    self.config.enumeration.samples,
                    self.config.enumeration.boundary_only,
                    seed,
                );
                solve_enumeration(model, &self.scene, &errors)
            }
        }
    }

    fn evaluation_pdfs(&self, delta: f64, delta_index: usize) -> Result<Vec<GriddedPdf>> {
        let seed = derive_seed(self.config.seed, Purpose::Evaluation, delta_index as u64);
        let scheme = PerturbationScheme::around(self.mixture.clone());
        Ok(sample_real_pdfs(
            &self.p_bar,
            delta,
            &scheme,
            seed,
            self.config.evaluation.samples,
        )?
        .into_iter()
        .map(|(p, _)| p)
        .collect())
    }
}

/// One `(δ, scheme)` cell of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub delta: f64,
    pub scheme: Scheme,
    /// Worst-case PCRB over the whole ball under the quadratic model: `1/t*`
    /// for the robust scheme, the trust-region worst case at `W*` otherwise.
    pub pcrb_model: f64,
    /// Largest exact PCRB over the evaluation realizations.
    pub pcrb_sampled: f64,
    pub seconds: f64,
    /// Solver status, or `error: …` when the cell failed.
    pub status: String,
    /// Solver optimum (`NaN` on failure).
    pub t_star: f64,
    pub w_star: Option<TransmitCovariance>,
}

impl SweepRecord {
    fn failed(delta: f64, scheme: Scheme, seconds: f64, err: &Error) -> Self {
        Self {
            delta,
            scheme,
            pcrb_model: f64::NAN,
            pcrb_sampled: f64::NAN,
            seconds,
            status: format!("error: {err}"),
            t_star: f64::NAN,
            w_star: None,
        }
    }
}

fn run_cell(
    ctx: &ExperimentContext,
    delta: f64,
    delta_index: usize,
    scheme: Scheme,
    pdfs: &[GriddedPdf],
) -> SweepRecord {
    let start = Instant::now();
    let outcome = (|| -> Result<(RobustSolution, f64)> {
        let model = ctx.model(delta)?;
        let sol = ctx.solve(scheme, &model, delta_index)?;
        let seconds = start.elapsed().as_secs_f64();
        Ok((sol, seconds))
    })();
    let (sol, seconds) = match outcome {
        Ok(v) => v,
        Err(e) => {
            warn!("δ = {delta}, {scheme}: {e}");
            return SweepRecord::failed(delta, scheme, start.elapsed().as_secs_f64(), &e);
        }
    };
    let evaluated = (|| -> Result<(f64, f64)> {
        let model = ctx.model(delta)?;
        let pcrb_model = match scheme {
            Scheme::Robust => 1.0 / sol.t_star,
            _ => trust_region_worst_case(&model, &sol.w_star)?.pcrb,
        };
        let (sampled, _) = worst_case_pcrb_sampled(&sol.w_star, pdfs, &ctx.gains, &ctx.scene)?;
        Ok((pcrb_model, sampled.value))
    })();
    match evaluated {
        Ok((pcrb_model, pcrb_sampled)) => SweepRecord {
            delta,
            scheme,
            pcrb_model,
            pcrb_sampled,
            seconds,
            status: sol.status.to_string(),
            t_star: sol.t_star,
            w_star: Some(sol.w_star),
        },
        Err(e) => {
            warn!("δ = {delta}, {scheme}: evaluation failed: {e}");
            SweepRecord {
                status: format!("error: {e}"),
                ..SweepRecord::failed(delta, scheme, seconds, &e)
            }
        }
    }
}

/// Every configured scheme at every δ, evaluated against one shared set of
/// realizations per δ. Cells run in parallel; failures are kept in-row.
pub fn run_delta_sweep(config: &ExperimentConfig) -> Result<Vec<SweepRecord>> {
    let ctx = ExperimentContext::new(config)?;
    let deltas = &config.sweep.deltas;
    info!(
        "sweep: N = {}, {} δ values, schemes {:?}",
        ctx.grid.n_points(),
        deltas.len(),
        config.schemes
    );
    let pdfs: Vec<Vec<GriddedPdf>> = deltas
        .par_iter()
        .enumerate()
        .map(|(i, d)| ctx.evaluation_pdfs(*d, i))
        .collect::<Result<_>>()?;
    let cells: Vec<(usize, Scheme)> = (0..deltas.len())
        .flat_map(|i| config.schemes.iter().map(move |s| (i, *s)))
        .collect();
    let records = cells
        .par_iter()
        .map(|&(i, scheme)| run_cell(&ctx, deltas[i], i, scheme, &pdfs[i]))
        .collect();
    Ok(records)
}

/// Transmit power pattern `aᴴ(θ_k) W a(θ_k)` on every grid angle.
pub fn beampattern(w: &TransmitCovariance, grid: &AngleGrid) -> DVector<f64> {
    DVector::from_iterator(
        grid.n_points(),
        grid.points().iter().map(|&theta| {
            let a = transmit_steering(theta, w.dim()).expect("grid angles lie in the domain");
            let v: C64 = (a.adjoint() * w.matrix() * &a)[(0, 0)];
            v.re.max(0.0)
        }),
    )
}

/// A power pattern with the densities it is meant to be overlaid on.
#[derive(Debug, Clone, PartialEq)]
pub struct BeampatternResult {
    pub scheme: Scheme,
    pub delta: f64,
    pub theta: Vec<f64>,
    pub pattern: DVector<f64>,
    pub p_bar: DVector<f64>,
    /// `p̄ + e*` for the worst-case error of this design under the quadratic model.
    pub worst_case_pdf: DVector<f64>,
}

impl BeampatternResult {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        w.write_record(["theta", "pattern", "p_bar", "worst_case_pdf"])
            .map_err(|e| csv_error(path, e))?;
        for k in 0..self.theta.len() {
            w.write_record([
                format!("{:.17e}", self.theta[k]),
                format!("{:.17e}", self.pattern[k]),
                format!("{:.17e}", self.p_bar[k]),
                format!("{:.17e}", self.worst_case_pdf[k]),
            ])
            .map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e))
}

/// Power patterns of the given schemes at `config.beampattern.delta`.
pub fn run_beampattern(
    config: &ExperimentConfig,
    schemes: &[Scheme],
) -> Result<Vec<BeampatternResult>> {
    let ctx = ExperimentContext::new(config)?;
    let delta = config.beampattern.delta;
    let index = config.sweep.deltas.len();
    let model = ctx.model(delta)?;
    schemes
        .iter()
        .map(|&scheme| {
            let sol = ctx.solve(scheme, &model, index)?;
            let cert = trust_region_worst_case(&model, &sol.w_star)?;
            Ok(BeampatternResult {
                scheme,
                delta,
                theta: ctx.grid.points().to_vec(),
                pattern: beampattern(&sol.w_star, &ctx.grid),
                p_bar: ctx.p_bar.density().clone(),
                worst_case_pdf: ctx.p_bar.density() + &cert.e_star.e,
            })
        })
        .collect()
}

/// Median wall-clock of the robust and enumeration solves at one radius.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingReport {
    pub delta: f64,
    pub n_points: usize,
    pub enumeration_samples: usize,
    pub repeats: usize,
    pub robust_seconds: f64,
    pub enumeration_seconds: f64,
    pub robust_status: String,
    pub enumeration_status: String,
}

impl TimingReport {
    /// `robust / enumeration`.
    pub fn ratio(&self) -> f64 {
        self.robust_seconds / self.enumeration_seconds
    }

    pub fn robust_is_faster(&self) -> bool {
        self.robust_seconds < self.enumeration_seconds
    }
}

impl fmt::Display for TimingReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "delta = {}", self.delta)?;
        writeln!(f, "grid_points = {}", self.n_points)?;
        writeln!(f, "enumeration_samples = {}", self.enumeration_samples)?;
        writeln!(f, "repeats = {}", self.repeats)?;
        writeln!(f, "robust_seconds = {:.6}", self.robust_seconds)?;
        writeln!(f, "robust_status = {}", self.robust_status)?;
        writeln!(f, "enumeration_seconds = {:.6}", self.enumeration_seconds)?;
        writeln!(f, "enumeration_status = {}", self.enumeration_status)?;
        writeln!(f, "ratio = {:.4}", self.ratio())?;
        write!(f, "reduction_percent = {:.2}", 100.0 * (1.0 - self.ratio()))
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Time both solves from the same model. Enumeration errors are drawn before
/// the clock starts, so only assembly and the conic solve are compared.
pub fn run_timing_comparison(config: &ExperimentConfig) -> Result<TimingReport> {
    let ctx = ExperimentContext::new(config)?;
    let delta = config.timing.delta;
    let model = ctx.model(delta)?;
    let seed = derive_seed(config.seed, Purpose::Enumeration, u32::MAX as u64);
    let errors = sample_ball_errors(
        &model,
        config.enumeration.samples,
        config.enumeration.boundary_only,
        seed,
    );
    // Warm caches and the allocator once before measuring.
    let _ = solve_robust(&model, &ctx.scene)?;
    let mut robust = Vec::new();
    let mut enumeration = Vec::new();
    let mut robust_status = String::new();
    let mut enumeration_status = String::new();
    for _ in 0..config.timing.repeats {
        let t = Instant::now();
        let r = solve_robust(&model, &ctx.scene)?;
        robust.push(t.elapsed().as_secs_f64());
        robust_status = r.status.to_string();
        let t = Instant::now();
        let e = solve_enumeration(&model, &ctx.scene, &errors)?;
        enumeration.push(t.elapsed().as_secs_f64());
        enumeration_status = e.status.to_string();
    }
    Ok(TimingReport {
        delta,
        n_points: ctx.grid.n_points(),
        enumeration_samples: config.enumeration.samples,
        repeats: config.timing.repeats,
        robust_seconds: median(robust),
        enumeration_seconds: median(enumeration),
        robust_status,
        enumeration_status,
    })
}

/// Column order of the sweep CSV.
pub const SWEEP_HEADER: [&str; 6] = [
    "delta",
    "scheme",
    "pcrb_model",
    "pcrb_sampled",
    "seconds",
    "status",
];

pub fn write_sweep_csv(records: &[SweepRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(SWEEP_HEADER)
        .map_err(|e| csv_error(path, e))?;
    for r in records {
        w.write_record([
            format!("{}", r.delta),
            r.scheme.to_string(),
            format!("{:.17e}", r.pcrb_model),
            format!("{:.17e}", r.pcrb_sampled),
            format!("{:.6}", r.seconds),
            r.status.clone(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn git_revision() -> String {
    std::process::Command::new("git")
        .args(["rev-parse", "HEAD"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".into())
}

/// Plain-text run manifest.
pub fn manifest(config: &ExperimentConfig) -> String {
    let s = SolverSettings::default();
    let n = config.grid().map(|g| g.n_points()).unwrap_or(0);
    format!(
        "seed = {}\ngit_revision = {}\ngrid_points = {n}\npaper_scale = {}\nsolver_tolerance = {:e}\nsolver_relaxed_tolerance = {:e}\nsolver_max_iterations = {}\n",
        config.seed,
        git_revision(),
        config.paper_scale,
        s.tolerance,
        s.relaxed_tolerance,
        s.max_iterations,
    )
}

/// Write `sweep.csv`, `manifest.txt` and the effective `config.toml` into `dir`.
pub fn persist_results(
    records: &[SweepRecord],
    config: &ExperimentConfig,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_path = dir.join("sweep.csv");
    write_sweep_csv(records, &csv_path)?;
    let manifest_path = dir.join("manifest.txt");
    fs::write(&manifest_path, manifest(config)).map_err(|e| Error::io(&manifest_path, e))?;
    let config_path = dir.join("config.toml");
    fs::write(&config_path, config.to_toml_string()?).map_err(|e| Error::io(&config_path, e))?;
    Ok(vec![csv_path, manifest_path, config_path])
}
