use std::path::{Path, PathBuf};

use rfblt::eval::{
    holt_fit_forecast, run_ensemble, run_expanding_window, ExpandingWindowPlan, MetricReport,
    WindowForecast,
};
use rfblt::sueir::{generate_ensemble, integrate_sueir, NoiseSpec};
use rfblt::{fit, Execution, FitOptions, SeedTree, TimeSeries};
use serde::Serialize;

use crate::config::{Manifest, Method, RunConfig};
use crate::error::{CliError, CliResult};
use crate::output::{check_target, fingerprint, trajectory_files, Staging};

fn fmt(v: f64) -> String {
    v.to_string()
}

fn read_series(path: &Path) -> CliResult<TimeSeries> {
    Ok(TimeSeries::from_csv_path(path)?)
}

/// Writes the clean infectious proportion and `count` noisy, smoothed trajectories.
pub fn simulate(cfg: RunConfig, out: &Path, force: bool) -> CliResult<PathBuf> {
    let sim = &cfg.simulate;
    sim.params.validate()?;
    let noise = NoiseSpec {
        sigma_zeta: sim.sigma_zeta,
        seed: cfg.seed,
        mode: sim.noise_mode,
    };
    let clean = integrate_sueir(&sim.params)?.infectious_proportion()?;
    let ensemble = generate_ensemble(&sim.params, &noise, sim.count, Execution::Parallel)?;

    let mut staging = Staging::new(out, force)?;
    staging.write_with("clean.csv", |w| Ok(clean.write_csv(w)?))?;
    for t in &ensemble {
        staging.write_with(&format!("{}.csv", t.series.name()), |w| {
            Ok(t.series.write_csv(w)?)
        })?;
    }
    staging.commit(|files| Manifest::new("simulate", cfg, None, files))
}

#[derive(Debug, Serialize)]
struct FitSummary {
    n_observations: usize,
    embed_dim: usize,
    n_features: usize,
    retained_draws: usize,
    sigma_delta_sq: f64,
    scaler_min: Option<f64>,
    scaler_max: Option<f64>,
}

fn fit_input(cfg: &RunConfig) -> CliResult<(TimeSeries, FitOptions)> {
    if cfg.method == Method::Holt {
        return Err(CliError::Validation(
            "holt has no posterior; use rfblt or rfbl".into(),
        ));
    }
    let series = read_series(cfg.input_path()?)?;
    Ok((series, cfg.model.clone()))
}

/// Fits a model and writes its posterior draws and frozen feature map.
pub fn fit_model(cfg: RunConfig, out: &Path, force: bool) -> CliResult<PathBuf> {
    let (series, options) = fit_input(&cfg)?;
    let digest = fingerprint(cfg.input_path()?)?;
    let mut staging = Staging::new(out, force)?;
    let model = fit(&series, &options)?;
    staging.write_with("posterior.csv", |w| Ok(model.draws.write_csv(w)?))?;
    staging.write_with("feature_map.txt", |w| {
        Ok(model.feature_map.write_dump(w)?)
    })?;
    let summary = FitSummary {
        n_observations: series.len(),
        embed_dim: model.embed_dim,
        n_features: model.feature_map.n_features(),
        retained_draws: model.draws.len(),
        sigma_delta_sq: model.sigma_delta_sq,
        scaler_min: model.scaler.map(|s| s.min()),
        scaler_max: model.scaler.map(|s| s.max()),
    };
    staging.write_json("fit_summary.json", &summary)?;
    staging.commit(|files| Manifest::new("fit", cfg, Some(digest), files))
}

/// Fits on the whole input and forecasts `h` steps past its end.
pub fn forecast(cfg: RunConfig, out: &Path, force: bool) -> CliResult<PathBuf> {
    let input = cfg.input_path()?.to_path_buf();
    let digest = fingerprint(&input)?;
    let mut staging = Staging::new(out, force)?;
    if cfg.method == Method::Holt {
        let series = read_series(&input)?;
        let mean = holt_fit_forecast(series.values(), cfg.h)?;
        let step = series.mean_step();
        let rows: Vec<Vec<String>> = mean
            .iter()
            .enumerate()
            .map(|(k, v)| vec![fmt(series.last_time() + (k + 1) as f64 * step), fmt(*v)])
            .collect();
        staging.write_table("forecast.csv", &["time".into(), "mean".into()], &rows)?;
    } else {
        let (series, options) = fit_input(&cfg)?;
        let result = fit(&series, &options)?.forecast(cfg.h, cfg.alpha)?;
        staging.write_with("forecast.csv", |w| Ok(result.write_csv(w)?))?;
        staging.write_with("paths.csv", |w| Ok(result.write_paths_csv(w)?))?;
    }
    staging.commit(|files| Manifest::new("forecast", cfg, Some(digest), files))
}

/// Headline numbers of an `evaluate` run; also written as `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalSummary {
    pub method: Method,
    pub windows: usize,
    pub median_relative_error: f64,
    pub mda: Vec<f64>,
    pub coverage_prob: Option<Vec<f64>>,
    pub median_coverage_ranges: Option<Vec<f64>>,
}

/// Forecaster used for window `window`; each window gets its own derived seed.
fn window_forecaster(
    cfg: &RunConfig,
) -> impl Fn(usize, &TimeSeries, &[f64]) -> rfblt::Result<WindowForecast> + Sync + '_ {
    move |window, train, times| match cfg.method {
        Method::Holt => Ok(WindowForecast::point(holt_fit_forecast(
            train.values(),
            times.len(),
        )?)),
        Method::Rfblt | Method::Rfbl => {
            let options = FitOptions {
                seed: SeedTree::new(cfg.seed).child(window as u64).seed(),
                execution: Execution::Sequential,
                ..cfg.model.clone()
            };
            let r = fit(train, &options)?.forecast_at(times, cfg.alpha, Execution::Sequential)?;
            Ok(WindowForecast::with_interval(r.mean, r.lower, r.upper))
        }
    }
}

/// Expanding-window backtest of a series CSV, or one window per trajectory
/// when the input is a `simulate` output directory.
pub fn evaluate(cfg: RunConfig, out: &Path, force: bool) -> CliResult<(PathBuf, EvalSummary)> {
    let input = cfg.input_path()?.to_path_buf();
    check_target(out, force)?;
    let m = cfg.m.ok_or_else(|| {
        CliError::Validation("evaluate needs a first training length (--train-end or \"m\")".into())
    })?;
    let forecaster = window_forecaster(&cfg);

    // Everything is validated before the (possibly long) run starts.
    let (names, report) = if input.is_dir() {
        let series: Vec<TimeSeries> = trajectory_files(&input)?
            .iter()
            .map(|p| read_series(p))
            .collect::<CliResult<_>>()?;
        for s in &series {
            ExpandingWindowPlan::new(m, cfg.h, s.len())?;
        }
        let report = run_ensemble(&series, m, cfg.h, Execution::Parallel, &forecaster)?;
        (
            series
                .iter()
                .map(|s| s.name().to_string())
                .collect::<Vec<_>>(),
            report,
        )
    } else {
        let series = read_series(&input)?;
        let plan = ExpandingWindowPlan::new(m, cfg.h, series.len())?;
        let report = run_expanding_window(&series, &plan, Execution::Parallel, &forecaster)?;
        (
            (0..report.len())
                .map(|i| format!("window_{i:03}"))
                .collect(),
            report,
        )
    };
    drop(forecaster);

    let digest = fingerprint(&input)?;
    let summary = EvalSummary {
        method: cfg.method,
        windows: report.len(),
        median_relative_error: report.median_relative_error(),
        mda: report.mda.clone(),
        coverage_prob: report.coverage_prob.clone(),
        median_coverage_ranges: report.median_coverage_ranges(),
    };
    let mut staging = Staging::new(out, force)?;
    write_report(&mut staging, &names, &report)?;
    staging.write_json("summary.json", &summary)?;
    let dir = staging.commit(|files| Manifest::new("evaluate", cfg, Some(digest), files))?;
    Ok((dir, summary))
}

fn write_report(staging: &mut Staging, names: &[String], report: &MetricReport) -> CliResult<()> {
    let h = report.mda.len();
    let steps: Vec<String> = (1..=h).map(|q| format!("step_{q}")).collect();

    let rows: Vec<Vec<String>> = report
        .windows
        .iter()
        .enumerate()
        .map(|(i, w)| {
            vec![
                i.to_string(),
                names[i].clone(),
                w.train_len.to_string(),
                fmt(report.relative_errors[i]),
            ]
        })
        .collect();
    let header = ["window", "series", "train_len", "relative_error"].map(String::from);
    staging.write_table("metrics.csv", &header, &rows)?;

    let rows: Vec<Vec<String>> = report
        .mda
        .iter()
        .enumerate()
        .map(|(q, v)| vec![(q + 1).to_string(), fmt(*v)])
        .collect();
    staging.write_table("mda.csv", &["step".into(), "mda".into()], &rows)?;

    if let (Some(prob), Some(ranges), Some(medians)) = (
        &report.coverage_prob,
        &report.coverage_ranges,
        report.median_coverage_ranges(),
    ) {
        let rows: Vec<Vec<String>> = (0..h)
            .map(|q| vec![(q + 1).to_string(), fmt(prob[q]), fmt(medians[q])])
            .collect();
        let header = ["step", "coverage_prob", "median_range"].map(String::from);
        staging.write_table("coverage.csv", &header, &rows)?;

        let mut header = vec!["window".to_string()];
        header.extend(steps.iter().cloned());
        let rows: Vec<Vec<String>> = ranges
            .iter()
            .enumerate()
            .map(|(i, r)| {
                std::iter::once(i.to_string())
                    .chain(r.iter().map(|v| fmt(*v)))
                    .collect()
            })
            .collect();
        staging.write_table("coverage_ranges.csv", &header, &rows)?;
    }

    for (i, w) in report.windows.iter().enumerate() {
        let interval = w.forecast.interval.as_ref();
        let rows: Vec<Vec<String>> = (0..h)
            .map(|q| {
                let mut row = vec![fmt(w.times[q]), fmt(w.actual[q]), fmt(w.forecast.mean[q])];
                if let Some((lo, up)) = interval {
                    row.push(fmt(lo[q]));
                    row.push(fmt(up[q]));
                }
                row
            })
            .collect();
        let mut header = ["time", "actual", "mean"].map(String::from).to_vec();
        if interval.is_some() {
            header.extend(["lower", "upper"].map(String::from));
        }
        staging.write_table(&format!("forecasts/{}.csv", names[i]), &header, &rows)?;
    }
    Ok(())
}
