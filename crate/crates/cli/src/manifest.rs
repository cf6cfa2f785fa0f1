use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;

use crate::CliError;

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: &'static str,
    pub config: Value,
    pub seed: u64,
    pub workers: usize,
    pub started_unix: u64,
    pub wall_clock_seconds: f64,
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<Value>,
    pub outputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub acceptance: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub notes: Option<Value>,
}

/// Collects run metadata and writes `manifest.json` when the run ends,
/// whether or not it succeeded.
pub struct Recorder {
    manifest: Manifest,
    clock: Instant,
}

impl Recorder {
    pub fn start<C: Serialize>(command: &str, config: &C, seed: u64, workers: usize) -> Result<Self, CliError> {
        let config = serde_json::to_value(config).map_err(|e| CliError::Run(e.into()))?;
        let started_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Ok(Recorder {
            manifest: Manifest {
                command: command.to_owned(),
                version: env!("CARGO_PKG_VERSION"),
                config,
                seed,
                workers,
                started_unix,
                wall_clock_seconds: 0.0,
                status: "running",
                error: None,
                outputs: Vec::new(),
                acceptance: None,
                notes: None,
            },
            clock: Instant::now(),
        })
    }

    pub fn output(&mut self, name: &str) {
        self.manifest.outputs.push(name.to_owned());
    }

    pub fn acceptance(&mut self, value: Value) {
        self.manifest.acceptance = Some(value);
    }

    pub fn notes(&mut self, value: Value) {
        self.manifest.notes = Some(value);
    }

    /// Writes the manifest and passes `result` through.
    pub fn finish(mut self, dir: &Path, result: Result<(), CliError>) -> Result<(), CliError> {
        self.manifest.wall_clock_seconds = self.clock.elapsed().as_secs_f64();
        match &result {
            Ok(()) => self.manifest.status = "ok",
            Err(e) => {
                self.manifest.status = "failed";
                self.manifest.error = Some(e.to_json()["error"].clone());
            }
        }
        let text = serde_json::to_string_pretty(&self.manifest).map_err(|e| CliError::Run(e.into()))?;
        let written = std::fs::write(dir.join("manifest.json"), text + "\n").map_err(|e| {
            CliError::Run(dpm_ergm::Error::Io {
                path: dir.join("manifest.json"),
                source: e,
            })
        });
        result.and(written)
    }
}
