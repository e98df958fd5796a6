use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;
use robust_pcrb::experiments::{
    load_config, manifest, persist_results, run_beampattern, run_delta_sweep,
    run_timing_comparison, ExperimentConfig, ExperimentContext, Scheme,
};
use robust_pcrb::Error;

#[derive(Debug, Parser)]
#[command(
    name = "robust-pcrb",
    version,
    about = "Robust transmit covariance design experiments"
)]
struct Cli {
    /// Experiment configuration (TOML); the built-in defaults when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Root seed; overrides `seed`.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Use the fine grid spacing.
    #[arg(long, global = true)]
    paper_scale: bool,
    /// Restrict to these schemes (repeatable): robust, nominal, enumeration.
    #[arg(long = "scheme", global = true, value_name = "NAME")]
    schemes: Vec<String>,
    /// Debug logging, plus the model matrices under `<out>/model` for `sweep`.
    /// `RUST_LOG` takes precedence for the log level.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve every scheme at every δ and write sweep.csv.
    Sweep,
    /// Radiated power patterns at the configured δ.
    Beampattern,
    /// Robust solve against the enumeration benchmark, median wall-clock.
    Timing,
}

fn effective_config(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let mut config = match &cli.config {
        Some(path) => load_config(path)?,
        None => ExperimentConfig::default_config(),
    };
    if let Some(out) = &cli.out {
        config.output_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if cli.paper_scale {
        config.paper_scale = true;
    }
    if !cli.schemes.is_empty() {
        let mut schemes = cli
            .schemes
            .iter()
            .map(|s| s.parse::<Scheme>())
            .collect::<Result<Vec<_>, _>>()?;
        schemes.sort();
        schemes.dedup();
        config.schemes = schemes;
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: &Cli) -> Result<(), Error> {
    let config = effective_config(cli)?;
    let dir = config.output_dir.clone();
    match cli.command {
        Command::Sweep => {
            let records = run_delta_sweep(&config)?;
            let files = persist_results(&records, &config, &dir)?;
            println!(
                "{:>6}  {:<12} {:>14} {:>14} {:>9}  status",
                "delta", "scheme", "pcrb_model", "pcrb_sampled", "seconds"
            );
            for r in &records {
                println!(
                    "{:>6}  {:<12} {:>14.6e} {:>14.6e} {:>9.3}  {}",
                    r.delta, r.scheme, r.pcrb_model, r.pcrb_sampled, r.seconds, r.status
                );
            }
            for f in files {
                info!("wrote {}", f.display());
            }
            if cli.verbose {
                let model_dir = dir.join("model");
                ExperimentContext::new(&config)?
                    .model(0.0)?
                    .export_csv(&model_dir)?;
                info!("model matrices in {}", model_dir.display());
            }
        }
        Command::Beampattern => {
            let schemes = if cli.schemes.is_empty() {
                vec![Scheme::Robust, Scheme::Nominal]
            } else {
                config.schemes.clone()
            };
            let results = run_beampattern(&config, &schemes)?;
            fs::create_dir_all(&dir).map_err(|e| Error::Io {
                path: dir.clone(),
                source: e,
            })?;
            for r in &results {
                let path = dir.join(format!("beampattern_{}.csv", r.scheme));
                r.write_csv(&path)?;
                let (k, peak) =
                    r.pattern
                        .iter()
                        .enumerate()
                        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| {
                            if *v > acc.1 {
                                (i, *v)
                            } else {
                                acc
                            }
                        });
                println!(
                    "{:<12} delta = {}  peak {:.4e} at {:.2} deg  -> {}",
                    r.scheme,
                    r.delta,
                    peak,
                    r.theta[k].to_degrees(),
                    path.display()
                );
            }
            write_text(&dir.join("manifest.txt"), &manifest(&config))?;
        }
        Command::Timing => {
            if !cli.schemes.is_empty() {
                log::warn!("--scheme is ignored; timing always compares robust and enumeration");
            }
            let report = run_timing_comparison(&config)?;
            println!("{report}");
            fs::create_dir_all(&dir).map_err(|e| Error::Io {
                path: dir.clone(),
                source: e,
            })?;
            write_text(&dir.join("timing.txt"), &format!("{report}\n"))?;
            write_text(&dir.join("manifest.txt"), &manifest(&config))?;
        }
    }
    Ok(())
}

fn write_text(path: &std::path::Path, text: &str) -> Result<(), Error> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "debug" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
