//! `rfblt` command-line runner: `simulate`, `fit`, `forecast` and `evaluate`.
//!
//! Every run writes into a fresh output directory together with a
//! `manifest.json` holding the fully resolved configuration. Passing that
//! manifest back as `--config` replays the run.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rfblt::{Activation, FeatureCount, Smoothing};

use crate::config::{Method, RunConfig};
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "rfblt",
    version,
    about = "Random-feature Bayesian lasso forecasting"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate an SμEIR ensemble of noisy, smoothed infectious proportions.
    Simulate(RunArgs),
    /// Fit a model and export its posterior draws and feature map.
    Fit(RunArgs),
    /// Fit on a whole series and forecast past its end.
    Forecast(RunArgs),
    /// Expanding-window backtest of a series, or of a simulated ensemble directory.
    Evaluate(RunArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Fit(_) => "fit",
            Command::Forecast(_) => "forecast",
            Command::Evaluate(_) => "evaluate",
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Command::Simulate(a)
            | Command::Fit(a)
            | Command::Forecast(a)
            | Command::Evaluate(a) => a,
        }
    }
}

/// Flags override the values loaded from `--config`.
#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Series CSV (time,value); `evaluate` also takes a simulate output directory.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub output_dir: PathBuf,
    /// JSON run config or a previous run's manifest.json.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Embedding window size.
    #[arg(long)]
    pub m: Option<usize>,
    /// Number of random features: half, sqrt, a count, or a multiplier like 1.5x.
    #[arg(long)]
    pub features: Option<String>,
    /// Total Gibbs iterations.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Credible intervals cover 1 − alpha.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, value_enum)]
    pub mode: Option<Method>,
    #[arg(long)]
    pub activation: Option<String>,
    /// Min-max scale each training window.
    #[arg(long)]
    pub normalize: bool,
    /// Derivative smoothing window; 1 disables smoothing.
    #[arg(long)]
    pub smoothing: Option<usize>,
    /// First training length for `evaluate`.
    #[arg(long)]
    pub train_end: Option<usize>,
    /// Number of simulated trajectories.
    #[arg(long)]
    pub count: Option<usize>,
    /// Simulated noise level as a fraction of the peak.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Replace a non-empty output directory.
    #[arg(long)]
    pub force: bool,
}

impl RunArgs {
    fn into_config(self, command: &str) -> CliResult<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path, command)?,
            None => RunConfig::default(),
        };
        let gibbs = &mut cfg.model.gibbs;
        if let Some(v) = self.samples {
            gibbs.n_samples = v;
        }
        if let Some(v) = self.burn_in {
            gibbs.burn_in = v;
        }
        if let Some(v) = self.thin {
            gibbs.thin = v;
        }
        if let Some(v) = self.input {
            cfg.input = Some(v);
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.m {
            cfg.model.embed_dim = v;
        }
        if let Some(v) = self.features {
            cfg.model.features = v.parse::<FeatureCount>()?;
        }
        if let Some(v) = self.horizon {
            cfg.h = v;
        }
        if let Some(v) = self.alpha {
            cfg.alpha = v;
        }
        if let Some(v) = self.mode {
            cfg.method = v;
        }
        if let Some(v) = self.activation {
            cfg.model.activation = v.parse::<Activation>()?;
        }
        if self.normalize {
            cfg.model.normalize = true;
        }
        if let Some(v) = self.smoothing {
            cfg.model.smoothing = match v {
                0 => {
                    return Err(CliError::Validation(
                        "smoothing window must be at least 1".into(),
                    ))
                }
                1 => Smoothing::PassThrough,
                s => Smoothing::MovingAverage(s),
            };
        }
        if let Some(v) = self.train_end {
            cfg.m = Some(v);
        }
        if let Some(v) = self.count {
            cfg.simulate.count = v;
        }
        if let Some(v) = self.noise {
            cfg.simulate.sigma_zeta = v;
        }
        cfg.resolve()
    }
}

fn recorded_fingerprint(path: &std::path::Path) -> Option<String> {
    let text = std::fs::read_to_string(path).ok()?;
    let value: serde_json::Value = serde_json::from_str(&text).ok()?;
    value.get("input_sha256")?.as_str().map(str::to_owned)
}

/// Runs one subcommand; errors carry their exit code.
pub fn execute(command: Command) -> CliResult<PathBuf> {
    let name = command.name();
    let args = command.args().clone();
    let out = args.output_dir.clone();
    let force = args.force;
    let recorded = match &args.config {
        Some(path) => recorded_fingerprint(path),
        None => None,
    };
    let cfg = args.into_config(name)?;
    if let (Some(expected), Some(input)) = (recorded, cfg.input.as_deref()) {
        if input.exists() && output::fingerprint(input)? != expected {
            eprintln!(
                "warning: {} differs from the input recorded in the manifest; outputs will not match the original run",
                input.display()
            );
        }
    }
    match command {
        Command::Simulate(_) => commands::simulate(cfg, &out, force),
        Command::Fit(_) => commands::fit_model(cfg, &out, force),
        Command::Forecast(_) => commands::forecast(cfg, &out, force),
        Command::Evaluate(_) => commands::evaluate(cfg, &out, force).map(|(dir, _)| dir),
    }
}

/// Parses `args` and runs; returns the process exit code (0 ok, 1 invalid input, 2 run failure).
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(dir) => {
            println!("{}", dir.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
