use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use heom_core::model::{
    BasisParams, BathParams, HierarchyParams, InitialParams, ModelParams, OracleParams,
    SystemParams,
};
use heom_core::propagator::PropagationConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputParams {
    /// Default output path when `--out` is not given.
    pub path: PathBuf,
    /// Write `<out>.config.json` next to every output.
    pub echo_config: bool,
}

impl Default for OutputParams {
    fn default() -> Self {
        Self {
            path: PathBuf::from("trajectory.csv"),
            echo_config: true,
        }
    }
}

/// The JSON configuration file. Every key is optional and defaults to the
/// zero-temperature benchmark (ħω_S = 2 eV, V_I = 1 eV, ħΩ = 4 eV, K = 10, N_max = 5).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub system: SystemParams,
    pub bath: BathParams,
    pub basis: BasisParams,
    pub hierarchy: HierarchyParams,
    pub initial: InitialParams,
    pub integrator: PropagationConfig,
    pub oracle: OracleParams,
    pub outputs: OutputParams,
}

impl RunConfig {
    pub fn model(&self) -> ModelParams {
        ModelParams {
            system: self.system.clone(),
            bath: self.bath.clone(),
            basis: self.basis.clone(),
            hierarchy: self.hierarchy.clone(),
            initial: self.initial.clone(),
            integrator: self.integrator,
            oracle: self.oracle.clone(),
        }
    }
}

/// Parses and validates a configuration; an empty document gives the defaults.
pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let config: RunConfig = if text.trim().is_empty() {
        RunConfig::default()
    } else {
        serde_json::from_str(text).context("invalid configuration")?
    };
    config.model().validate()?;
    Ok(config)
}

pub fn parse_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => {
            let text =
                std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            parse_config_str(&text).with_context(|| format!("in {}", p.display()))
        }
        None => Ok(RunConfig::default()),
    }
}
