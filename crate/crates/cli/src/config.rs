//! Flat JSON run configuration with flag overrides.
//!
//! Precedence, highest first: command-line flag, config-file field,
//! `NOISEDIFF_SEED` (seed only), built-in default. Unknown config keys are
//! rejected by name.

use std::path::{Path, PathBuf};

use noisediff_core::ode::SigmaSchedule;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub sigma_min: Option<f64>,
    pub sigma_max: Option<f64>,
    pub n_steps: Option<usize>,
    pub rho: Option<f64>,
    pub lambda: Option<f64>,
    pub gamma: Option<f64>,
    pub c: Option<f64>,
    pub k: Option<f64>,
    pub seed: Option<u64>,
    pub mixture: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub input_a: Option<PathBuf>,
    pub input_b: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

/// Resolves a path that may come from a flag or the config file.
pub fn require_path(
    flag: Option<PathBuf>,
    file_value: Option<&PathBuf>,
    name: &str,
) -> Result<PathBuf, CliError> {
    flag.or_else(|| file_value.cloned())
        .ok_or_else(|| CliError::Validation(format!("{name}: required (flag or config field)")))
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(FileConfig::default()),
            Some(p) => {
                let bytes = std::fs::read(p).map_err(|e| {
                    CliError::Validation(format!("config file {}: {e}", p.display()))
                })?;
                serde_json::from_slice(&bytes)
                    .map_err(|e| CliError::Validation(format!("config file {}: {e}", p.display())))
            }
        }
    }
}

/// Schedule flags shared by every integrating subcommand.
#[derive(Debug, Clone, clap::Args)]
pub struct ScheduleArgs {
    /// Smallest noise level of the grid
    #[arg(long)]
    pub sigma_min: Option<f64>,
    /// Largest noise level of the grid
    #[arg(long)]
    pub sigma_max: Option<f64>,
    /// Number of grid points
    #[arg(long)]
    pub steps: Option<usize>,
    /// Grid curvature (larger crowds points toward sigma_min)
    #[arg(long)]
    pub rho: Option<f64>,
}

impl ScheduleArgs {
    pub fn resolve(&self, file: &FileConfig) -> Result<SigmaSchedule, CliError> {
        let sigma_min = self.sigma_min.or(file.sigma_min).unwrap_or(1e-3);
        let sigma_max = self.sigma_max.or(file.sigma_max).unwrap_or(80.0);
        let n_steps = self.steps.or(file.n_steps).unwrap_or(64);
        let rho = self.rho.or(file.rho).unwrap_or(7.0);
        SigmaSchedule::new(sigma_min, sigma_max, n_steps, rho).map_err(CliError::from)
    }
}

/// Seed resolution: `--seed` flag, then config file, then `NOISEDIFF_SEED`,
/// then 0.
pub fn resolve_seed(flag: Option<u64>, file: &FileConfig) -> Result<u64, CliError> {
    if let Some(s) = flag.or(file.seed) {
        return Ok(s);
    }
    match std::env::var("NOISEDIFF_SEED") {
        Ok(v) => v.parse::<u64>().map_err(|_| {
            CliError::Validation(format!(
                "NOISEDIFF_SEED: expected an unsigned integer, got {v:?}"
            ))
        }),
        Err(_) => Ok(0),
    }
}
