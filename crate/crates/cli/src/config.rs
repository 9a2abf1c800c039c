//! JSON run configuration and the manifest written next to every output.

use std::path::{Path, PathBuf};

use rfblt::sueir::{NoiseMode, SueirParams};
use rfblt::{FitOptions, ModelKind};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Rfblt,
    Rfbl,
    Holt,
}

impl Method {
    pub fn model_kind(self) -> Option<ModelKind> {
        match self {
            Method::Rfblt => Some(ModelKind::Rfblt),
            Method::Rfbl => Some(ModelKind::Rfbl),
            Method::Holt => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateConfig {
    pub params: SueirParams,
    pub count: usize,
    /// Observation noise as a fraction of the peak.
    pub sigma_zeta: f64,
    pub noise_mode: NoiseMode,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            params: SueirParams::default(),
            count: 100,
            sigma_zeta: 0.1,
            noise_mode: NoiseMode::PerPoint,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Series CSV, or for `evaluate` also a `simulate` output directory.
    pub input: Option<PathBuf>,
    pub seed: u64,
    pub method: Method,
    /// First training length for `evaluate`. On an ensemble every trajectory
    /// is trained on exactly this many points.
    pub m: Option<usize>,
    /// Forecast horizon.
    pub h: usize,
    pub alpha: f64,
    pub model: FitOptions,
    pub simulate: SimulateConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: None,
            seed: 0,
            method: Method::Rfblt,
            m: None,
            h: 7,
            alpha: 0.05,
            model: FitOptions::default(),
            simulate: SimulateConfig::default(),
        }
    }
}

impl RunConfig {
    /// Reads a config file. Manifests are accepted too; a recorded `command`
    /// must match the one being run.
    pub fn load(path: &Path, command: &str) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Validation(format!("cannot read config {}: {e}", path.display()))
        })?;
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| {
            CliError::Validation(format!("config {} is not valid JSON: {e}", path.display()))
        })?;
        if let Some(recorded) = value.get("command").and_then(|c| c.as_str()) {
            if recorded != command {
                return Err(CliError::Validation(format!(
                    "config {} was recorded for `{recorded}`, not `{command}`",
                    path.display()
                )));
            }
        }
        serde_json::from_value(value)
            .map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))
    }

    /// Ties the model's kind and seed to the top-level method and seed.
    pub fn resolve(mut self) -> CliResult<Self> {
        if let Some(kind) = self.method.model_kind() {
            self.model.kind = kind;
        }
        self.model.seed = self.seed;
        self.model.gibbs.seed = self.seed;
        if self.h == 0 {
            return Err(CliError::Validation("horizon must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CliError::Validation(format!(
                "alpha must be in (0, 1), got {}",
                self.alpha
            )));
        }
        self.model.gibbs.validate()?;
        self.model.weights.validate()?;
        self.model.biases.validate()?;
        Ok(self)
    }

    pub fn input_path(&self) -> CliResult<&Path> {
        let path = self.input.as_deref().ok_or_else(|| {
            CliError::Validation("no input given (use --input or the config's \"input\")".into())
        })?;
        if !path.exists() {
            return Err(CliError::Validation(format!(
                "input {} does not exist",
                path.display()
            )));
        }
        Ok(path)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    #[serde(flatten)]
    pub config: RunConfig,
    /// SHA-256 of the input file, or of the trajectory files of an input directory.
    pub input_sha256: Option<String>,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(
        command: &str,
        config: RunConfig,
        input_sha256: Option<String>,
        outputs: Vec<String>,
    ) -> Self {
        Self {
            tool: "rfblt".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config,
            input_sha256,
            outputs,
        }
    }
}
