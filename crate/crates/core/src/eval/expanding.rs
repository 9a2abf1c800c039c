//! Expanding-window backtests.

use serde::{Deserialize, Serialize};

use super::metrics::{coverage, directional_accuracy, mda, median, relative_error};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::series::TimeSeries;

/// Training prefixes of length `v = first_train_end ..= series_length − horizon`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpandingWindowPlan {
    pub first_train_end: usize,
    pub horizon: usize,
    pub series_length: usize,
}

impl ExpandingWindowPlan {
    pub fn new(first_train_end: usize, horizon: usize, series_length: usize) -> Result<Self> {
        let plan = Self {
            first_train_end,
            horizon,
            series_length,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.first_train_end < 2 || self.horizon == 0 {
            return Err(Error::InvalidConfig(
                "first_train_end must be at least 2 and horizon positive".into(),
            ));
        }
        if self.first_train_end + self.horizon > self.series_length {
            return Err(Error::EmptyPlan);
        }
        Ok(())
    }

    pub fn window_count(&self) -> usize {
        self.series_length - self.horizon - self.first_train_end + 1
    }

    /// Training prefix length for window `i`.
    pub fn train_len(&self, i: usize) -> usize {
        self.first_train_end + i
    }
}

/// What a forecaster returns for one window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowForecast {
    pub mean: Vec<f64>,
    /// Interval bounds; `None` for point forecasters.
    pub interval: Option<(Vec<f64>, Vec<f64>)>,
}

impl WindowForecast {
    pub fn point(mean: Vec<f64>) -> Self {
        Self {
            mean,
            interval: None,
        }
    }

    pub fn with_interval(mean: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        Self {
            mean,
            interval: Some((lower, upper)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowRecord {
    /// Training prefix length.
    pub train_len: usize,
    pub anchor: f64,
    pub times: Vec<f64>,
    pub actual: Vec<f64>,
    pub forecast: WindowForecast,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub windows: Vec<WindowRecord>,
    pub relative_errors: Vec<f64>,
    pub directional: Vec<Vec<u8>>,
    pub mda: Vec<f64>,
    pub coverage_prob: Option<Vec<f64>>,
    pub coverage_ranges: Option<Vec<Vec<f64>>>,
}

impl MetricReport {
    pub fn from_windows(windows: Vec<WindowRecord>) -> Result<Self> {
        if windows.is_empty() {
            return Err(Error::EmptyPlan);
        }
        let mut relative_errors = Vec::with_capacity(windows.len());
        let mut directional = Vec::with_capacity(windows.len());
        for (i, w) in windows.iter().enumerate() {
            if w.forecast.mean.len() != w.actual.len() {
                return Err(Error::Window {
                    window: i,
                    source: Box::new(Error::ShapeError(format!(
                        "forecast has {} steps, expected {}",
                        w.forecast.mean.len(),
                        w.actual.len()
                    ))),
                });
            }
            relative_errors.push(relative_error(&w.actual, &w.forecast.mean).map_err(|e| {
                Error::Window {
                    window: i,
                    source: Box::new(e),
                }
            })?);
            directional.push(
                w.actual
                    .iter()
                    .zip(&w.forecast.mean)
                    .map(|(&a, &p)| directional_accuracy(w.anchor, a, p))
                    .collect(),
            );
        }
        let mda = mda(&directional)?;
        let (coverage_prob, coverage_ranges) =
            if windows.iter().all(|w| w.forecast.interval.is_some()) {
                let actuals: Vec<Vec<f64>> = windows.iter().map(|w| w.actual.clone()).collect();
                let (lowers, uppers): (Vec<Vec<f64>>, Vec<Vec<f64>>) = windows
                    .iter()
                    .map(|w| w.forecast.interval.clone().expect("checked above"))
                    .unzip();
                let c = coverage(&actuals, &lowers, &uppers)?;
                (Some(c.probability), Some(c.ranges))
            } else {
                (None, None)
            };
        Ok(Self {
            windows,
            relative_errors,
            directional,
            mda,
            coverage_prob,
            coverage_ranges,
        })
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn median_relative_error(&self) -> f64 {
        median(&self.relative_errors)
    }

    /// Median coverage range per horizon step.
    pub fn median_coverage_ranges(&self) -> Option<Vec<f64>> {
        let ranges = self.coverage_ranges.as_ref()?;
        let h = self.mda.len();
        Some(
            (0..h)
                .map(|q| median(&ranges.iter().map(|r| r[q]).collect::<Vec<_>>()))
                .collect(),
        )
    }
}

fn evaluate_window<F>(
    window: usize,
    series: &TimeSeries,
    train_len: usize,
    horizon: usize,
    forecaster: &F,
) -> Result<WindowRecord>
where
    F: Fn(usize, &TimeSeries, &[f64]) -> Result<WindowForecast>,
{
    let train = series.prefix(train_len)?;
    let times = series.times()[train_len..train_len + horizon].to_vec();
    let actual = series.values()[train_len..train_len + horizon].to_vec();
    let forecast = forecaster(window, &train, &times)?;
    if forecast.mean.len() != horizon {
        return Err(Error::ShapeError(format!(
            "forecast has {} steps, expected {horizon}",
            forecast.mean.len()
        )));
    }
    Ok(WindowRecord {
        train_len,
        anchor: series.values()[train_len - 1],
        times,
        actual,
        forecast,
    })
}

/// Runs `forecaster(window_index, train_prefix, future_times)` on every window of `plan`.
///
/// Windows may run concurrently; records are always merged in window order and
/// the first failing window (lowest index) is reported.
pub fn run_expanding_window<F>(
    series: &TimeSeries,
    plan: &ExpandingWindowPlan,
    exec: Execution,
    forecaster: F,
) -> Result<MetricReport>
where
    F: Fn(usize, &TimeSeries, &[f64]) -> Result<WindowForecast> + Sync,
{
    plan.validate()?;
    if plan.series_length != series.len() {
        return Err(Error::InvalidConfig(format!(
            "plan expects {} points, series has {}",
            plan.series_length,
            series.len()
        )));
    }
    let windows = exec.try_map_indexed(plan.window_count(), |i| {
        evaluate_window(i, series, plan.train_len(i), plan.horizon, &forecaster).map_err(|e| {
            Error::Window {
                window: i,
                source: Box::new(e),
            }
        })
    })?;
    MetricReport::from_windows(windows)
}

/// Simulated protocol: one window per trajectory, each trained on its first
/// `train_len` points and scored on the next `horizon`.
pub fn run_ensemble<F>(
    trajectories: &[TimeSeries],
    train_len: usize,
    horizon: usize,
    exec: Execution,
    forecaster: F,
) -> Result<MetricReport>
where
    F: Fn(usize, &TimeSeries, &[f64]) -> Result<WindowForecast> + Sync,
{
    if trajectories.is_empty() {
        return Err(Error::EmptyPlan);
    }
    for t in trajectories {
        ExpandingWindowPlan::new(train_len, horizon, t.len())?;
    }
    let windows = exec.try_map_indexed(trajectories.len(), |i| {
        evaluate_window(i, &trajectories[i], train_len, horizon, &forecaster).map_err(|e| {
            Error::Window {
                window: i,
                source: Box::new(e),
            }
        })
    })?;
    MetricReport::from_windows(windows)
}
