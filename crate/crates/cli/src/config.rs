//! Run configurations, one JSON file per run.
//!
//! Relative paths are taken relative to the directory holding the config
//! file and stored resolved, so the config echoed into `manifest.json` can
//! be re-run from anywhere.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use dpm_ergm::assess::PpcConfig;
use dpm_ergm::dpm::DpmConfig;
use dpm_ergm::graph::EnsembleFormat;
use dpm_ergm::simulate::ChainLength;
use dpm_ergm::synth::MixtureSpec;
use dpm_ergm::{ModelSpec, Theta};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataRef {
    pub path: PathBuf,
    #[serde(default = "default_format")]
    pub format: EnsembleFormat,
}

fn default_format() -> EnsembleFormat {
    EnsembleFormat::JsonBundle
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub mixture: MixtureSpec,
    #[serde(default)]
    pub chain: ChainLength,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub model: ModelSpec,
    pub theta: Theta,
    /// Template ensemble; its graph `template_index` starts the chain and
    /// its covariates are used. Without data the chain starts empty.
    #[serde(default)]
    pub data: Option<DataRef>,
    #[serde(default)]
    pub template_index: usize,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub directed: bool,
    pub count: usize,
    #[serde(default)]
    pub chain: ChainLength,
    pub seed: u64,
    /// Also write the simulated graphs as a json-bundle.
    #[serde(default)]
    pub save_graphs: bool,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatioSweepConfig {
    pub model: ModelSpec,
    pub theta: Theta,
    pub theta_prime: Theta,
    #[serde(default)]
    pub data: Option<DataRef>,
    #[serde(default)]
    pub template_index: usize,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub directed: bool,
    pub m1_grid: Vec<usize>,
    pub m2_grid: Vec<usize>,
    pub replications: usize,
    #[serde(default)]
    pub chain: ChainLength,
    pub seed: u64,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub data: DataRef,
    pub model: ModelSpec,
    pub dpm: DpmConfig,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssessConfig {
    pub data: DataRef,
    pub model: ModelSpec,
    pub trace: PathBuf,
    pub burn_in: usize,
    pub ppc: PpcConfig,
    pub output_dir: PathBuf,
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

fn must_exist(field: &str, p: &Path) -> Result<(), CliError> {
    if p.exists() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{field}: {} does not exist", p.display())))
    }
}

fn check_template(data: &Option<DataRef>, n: Option<usize>) -> Result<(), CliError> {
    match (data, n) {
        (Some(d), _) => must_exist("data.path", &d.path),
        (None, Some(n)) if n >= 2 => Ok(()),
        (None, _) => Err(CliError::Config("either `data` or `n` (at least 2) is required".into())),
    }
}

/// Path fix-ups and checks that need no data loading.
pub trait RunConfig: Serialize + for<'de> Deserialize<'de> {
    fn resolve_paths(&mut self, base: &Path);
    fn validate(&self) -> Result<(), CliError>;
    fn output_dir(&self) -> &Path;
    fn seed(&self) -> u64;
}

impl RunConfig for SynthConfig {
    fn resolve_paths(&mut self, base: &Path) {
        resolve(base, &mut self.output_dir);
    }
    fn validate(&self) -> Result<(), CliError> {
        self.mixture.validate()?;
        Ok(self.chain.validate()?)
    }
    fn output_dir(&self) -> &Path {
        &self.output_dir
    }
    fn seed(&self) -> u64 {
        self.mixture.seed
    }
}

impl RunConfig for SimulateConfig {
    fn resolve_paths(&mut self, base: &Path) {
        if let Some(d) = &mut self.data {
            resolve(base, &mut d.path);
        }
        resolve(base, &mut self.output_dir);
    }
    fn validate(&self) -> Result<(), CliError> {
        check_template(&self.data, self.n)?;
        self.model
            .check_theta(&self.theta)
            .map_err(|e| CliError::Config(format!("theta: {e}")))?;
        Ok(self.chain.validate()?)
    }
    fn output_dir(&self) -> &Path {
        &self.output_dir
    }
    fn seed(&self) -> u64 {
        self.seed
    }
}

impl RunConfig for RatioSweepConfig {
    fn resolve_paths(&mut self, base: &Path) {
        if let Some(d) = &mut self.data {
            resolve(base, &mut d.path);
        }
        resolve(base, &mut self.output_dir);
    }
    fn validate(&self) -> Result<(), CliError> {
        check_template(&self.data, self.n)?;
        for (field, t) in [("theta", &self.theta), ("theta_prime", &self.theta_prime)] {
            self.model
                .check_theta(t)
                .map_err(|e| CliError::Config(format!("{field}: {e}")))?;
        }
        if self.m1_grid.is_empty() || self.m2_grid.is_empty() || self.replications == 0 {
            return Err(CliError::Config(
                "m1_grid, m2_grid and replications must be non-empty".into(),
            ));
        }
        if self.m2_grid.contains(&0) {
            return Err(CliError::Config("m2_grid: entries must be at least 1".into()));
        }
        Ok(self.chain.validate()?)
    }
    fn output_dir(&self) -> &Path {
        &self.output_dir
    }
    fn seed(&self) -> u64 {
        self.seed
    }
}

impl RunConfig for FitConfig {
    fn resolve_paths(&mut self, base: &Path) {
        resolve(base, &mut self.data.path);
        resolve(base, &mut self.output_dir);
    }
    fn validate(&self) -> Result<(), CliError> {
        must_exist("data.path", &self.data.path)?;
        Ok(self.dpm.validate(self.model.dim())?)
    }
    fn output_dir(&self) -> &Path {
        &self.output_dir
    }
    fn seed(&self) -> u64 {
        self.dpm.seed
    }
}

impl RunConfig for AssessConfig {
    fn resolve_paths(&mut self, base: &Path) {
        resolve(base, &mut self.data.path);
        resolve(base, &mut self.trace);
        resolve(base, &mut self.output_dir);
    }
    fn validate(&self) -> Result<(), CliError> {
        must_exist("data.path", &self.data.path)?;
        must_exist("trace", &self.trace)?;
        if self.ppc.stride == 0 {
            return Err(CliError::Config("ppc.stride must be at least 1".into()));
        }
        Ok(self.ppc.chain.validate()?)
    }
    fn output_dir(&self) -> &Path {
        &self.output_dir
    }
    fn seed(&self) -> u64 {
        self.ppc.seed
    }
}

/// Parses and checks a config. Everything that goes wrong here is a
/// configuration error.
pub fn load<C: RunConfig>(value: serde_json::Value, base: &Path) -> Result<C, CliError> {
    let mut cfg: C = serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))?;
    cfg.resolve_paths(base);
    cfg.validate()?;
    Ok(cfg)
}
