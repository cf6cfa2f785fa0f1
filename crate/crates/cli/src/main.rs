//! `dpm-ergm`: synthetic data, simulation, ratio sweeps, model fitting and
//! posterior assessment for Dirichlet process mixtures of ERGMs.
//!
//! Exit codes: 0 success, 1 run failure, 2 usage error, 3 configuration
//! error. Failures also print a one-line JSON error object on stderr.

mod commands;
mod config;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Run(dpm_ergm::Error),
}

impl From<dpm_ergm::Error> for CliError {
    fn from(e: dpm_ergm::Error) -> Self {
        match e {
            dpm_ergm::Error::Config(m) => CliError::Config(m),
            other => CliError::Run(other),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Run(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Config(_) => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "config",
            CliError::Run(e) => e.kind(),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({ "error": { "kind": self.kind(), "message": self.to_string() } })
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "dpm-ergm",
    version,
    about = "Dirichlet process mixtures of exponential random graph models"
)]
struct Cli {
    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, clap::Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Run configuration (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Re-run the configuration recorded in a previous run's manifest.
    #[arg(long)]
    from_manifest: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate an ensemble from a finite mixture of ERGMs.
    Synth(Source),
    /// Draw networks from an ERGM.
    Simulate(Source),
    /// Accuracy sweep of the normalising-constant ratio estimator.
    RatioSweep(Source),
    /// Fit with the true likelihood and estimated normalising-constant ratios.
    FitIims(Source),
    /// Fit with the pseudo-likelihood.
    FitPms(Source),
    /// Summarise a trace, simulate posterior predictive networks, compute distances.
    Assess(Source),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::Simulate(_) => "simulate",
            Command::RatioSweep(_) => "ratio-sweep",
            Command::FitIims(_) => "fit-iims",
            Command::FitPms(_) => "fit-pms",
            Command::Assess(_) => "assess",
        }
    }

    fn source(&self) -> &Source {
        match self {
            Command::Synth(s)
            | Command::Simulate(s)
            | Command::RatioSweep(s)
            | Command::FitIims(s)
            | Command::FitPms(s)
            | Command::Assess(s) => s,
        }
    }
}

fn read_json(path: &Path) -> Result<serde_json::Value, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// The raw config and the directory relative paths are resolved against.
fn config_value(cmd: &Command) -> Result<(serde_json::Value, PathBuf), CliError> {
    let src = cmd.source();
    if let Some(path) = &src.config {
        return Ok((read_json(path)?, base_dir(path)?));
    }
    let path = src.from_manifest.as_ref().expect("clap requires one source");
    let mut manifest = read_json(path)?;
    let recorded = manifest.get("command").and_then(|c| c.as_str()).unwrap_or_default();
    if recorded != cmd.name() {
        return Err(CliError::Config(format!(
            "manifest records command `{recorded}`, not `{}`",
            cmd.name()
        )));
    }
    let cfg = manifest
        .get_mut("config")
        .map(serde_json::Value::take)
        .ok_or_else(|| CliError::Config("manifest has no `config` section".into()))?;
    Ok((cfg, base_dir(path)?))
}

fn base_dir(config: &Path) -> Result<PathBuf, CliError> {
    let abs = std::path::absolute(config)
        .map_err(|e| CliError::Config(format!("cannot resolve {}: {e}", config.display())))?;
    Ok(abs.parent().map(Path::to_path_buf).unwrap_or_default())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (value, base) = config_value(&cli.command)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(k) = cli.workers {
        if k == 0 {
            return Err(CliError::Usage("--workers must be at least 1".into()));
        }
        pool = pool.num_threads(k);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
    let workers = pool.current_num_threads();
    let name = cli.command.name();
    pool.install(|| match cli.command {
        Command::Synth(_) => commands::synth(name, config::load(value, &base)?, workers),
        Command::Simulate(_) => commands::simulate(name, config::load(value, &base)?, workers),
        Command::RatioSweep(_) => commands::ratio_sweep(name, config::load(value, &base)?, workers),
        Command::FitIims(_) => commands::fit(name, config::load(value, &base)?, workers, false),
        Command::FitPms(_) => {
            let has_ratio = ["ratio_mmcmh", "ratio_alloc"]
                .iter()
                .any(|k| value.get("dpm").and_then(|d| d.get(k)).is_some());
            if has_ratio {
                log::warn!("fit-pms ignores dpm.ratio_mmcmh and dpm.ratio_alloc");
            }
            commands::fit(name, config::load(value, &base)?, workers, true)
        }
        Command::Assess(_) => commands::assess(name, config::load(value, &base)?, workers),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            let err = CliError::Usage(e.kind().to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.exit_code());
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code())
        }
    }
}
