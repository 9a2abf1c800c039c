//! Time series container, finite differences, smoothing and delay embedding.
//!
//! Indexing is 0-based throughout. Mapping to the usual 1-based notation
//! for a series `y_{t_1}, …, y_{t_n}`:
//!
//! | quantity                      | 1-based           | here                         |
//! |-------------------------------|-------------------|------------------------------|
//! | observation                   | `y_{t_k}`, k=1..n | `values[k-1]`                |
//! | forward difference            | `y'_{t_k}`, k=1..n-1 | `raw[k-1]`                |
//! | embedding row ending at `t_k` | `x_k`, k=m..n-1   | `design.row(k-m)`            |
//! | derivative target of `x_k`    | `ȳ'_{t_k}`        | `smoothed[k-1]`              |
//! | next-value target of `x_k`    | `y_{t_{k+1}}`     | `values[k]`                  |

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered `(time, value)` observations.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    times: Vec<f64>,
    values: Vec<f64>,
    name: String,
}

impl TimeSeries {
    /// Validates and builds a series: strictly increasing finite times, finite values, length ≥ 2.
    pub fn new(times: Vec<f64>, values: Vec<f64>, name: impl Into<String>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::InvalidSeries(format!(
                "{} time stamps but {} values",
                times.len(),
                values.len()
            )));
        }
        if values.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "a series needs at least 2 observations, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSeries(format!(
                "non-finite value at index {i}"
            )));
        }
        if let Some(i) = times.iter().position(|t| !t.is_finite()) {
            return Err(Error::InvalidSeries(format!(
                "non-finite time at index {i}"
            )));
        }
        if let Some(i) = times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidSeries(format!(
                "times not strictly increasing at index {}",
                i + 1
            )));
        }
        Ok(Self {
            times,
            values,
            name: name.into(),
        })
    }

    /// Unit-step series starting at `t0`.
    pub fn regular(t0: f64, values: Vec<f64>, name: impl Into<String>) -> Result<Self> {
        let times = (0..values.len()).map(|i| t0 + i as f64).collect();
        Self::new(times, values, name)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn last_time(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn last_value(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Mean spacing between consecutive time stamps.
    pub fn mean_step(&self) -> f64 {
        (self.last_time() - self.times[0]) / (self.len() - 1) as f64
    }

    /// The first `len` observations.
    pub fn prefix(&self, len: usize) -> Result<Self> {
        if len > self.len() {
            return Err(Error::InsufficientData(format!(
                "prefix of {len} requested from series of {}",
                self.len()
            )));
        }
        Self::new(
            self.times[..len].to_vec(),
            self.values[..len].to_vec(),
            self.name.clone(),
        )
    }

    /// Same time stamps, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.times.clone(), values, self.name.clone())
    }

    /// Reads a `time,value` CSV with a header row.
    pub fn read_csv<R: Read>(reader: R, name: impl Into<String>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 {
            return Err(Error::Csv(format!(
                "expected 2 columns (time,value), found {}",
                headers.len()
            )));
        }
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let parse = |s: &str, what: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::Csv(format!("row {}: cannot parse {what} {s:?}", i + 1)))
            };
            times.push(parse(&rec[0], "time")?);
            values.push(parse(&rec[1], "value")?);
        }
        Self::new(times, values, name)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let file = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(file), name)
    }

    /// Writes the series as `time,value` CSV.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["time", "value"])?;
        for (t, v) in self.times.iter().zip(&self.values) {
            w.write_record([t.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Forward differences `(y_{k+1} - y_k) / (t_{k+1} - t_k)`.
pub fn forward_difference(series: &TimeSeries) -> Result<Vec<f64>> {
    if series.len() < 2 {
        return Err(Error::InsufficientData(
            "forward difference needs at least 2 observations".into(),
        ));
    }
    Ok(series
        .times
        .windows(2)
        .zip(series.values.windows(2))
        .map(|(t, y)| (y[1] - y[0]) / (t[1] - t[0]))
        .collect())
}

/// Cumulative forward-Euler integration of `derivative` starting from `y0`
/// on the grid `times`; the inverse of [`forward_difference`].
pub fn euler_integrate(y0: f64, times: &[f64], derivative: &[f64]) -> Result<Vec<f64>> {
    if times.len() != derivative.len() + 1 {
        return Err(Error::ShapeError(format!(
            "{} time stamps for {} derivatives",
            times.len(),
            derivative.len()
        )));
    }
    let mut out = Vec::with_capacity(times.len());
    out.push(y0);
    let mut y = y0;
    for (dt, d) in times.windows(2).map(|w| w[1] - w[0]).zip(derivative) {
        y += d * dt;
        out.push(y);
    }
    Ok(out)
}

/// Trailing moving average with a partial window at the start.
pub fn left_moving_average(x: &[f64], window: usize) -> Result<Vec<f64>> {
    if window < 1 || window > x.len() {
        return Err(Error::InvalidWindow {
            window,
            len: x.len(),
        });
    }
    let mut out = Vec::with_capacity(x.len());
    for k in 0..x.len() {
        let start = (k + 1).saturating_sub(window);
        let slice = &x[start..=k];
        out.push(slice.iter().sum::<f64>() / slice.len() as f64);
    }
    Ok(out)
}

/// Derivative smoother.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Smoothing {
    /// Use raw forward differences; no smoothing error is modelled.
    #[default]
    PassThrough,
    /// Left moving average with the given window.
    MovingAverage(usize),
}

impl Smoothing {
    pub fn apply(&self, raw: &[f64]) -> Result<Vec<f64>> {
        match *self {
            Smoothing::PassThrough => Ok(raw.to_vec()),
            Smoothing::MovingAverage(s) => left_moving_average(raw, s),
        }
    }
}

/// Raw and smoothed derivatives together with the smoothing residual variance.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeSeries {
    pub raw: Vec<f64>,
    pub smoothed: Vec<f64>,
    pub residuals: Vec<f64>,
    pub sigma_delta_sq: f64,
    pub smoothing: Smoothing,
}

/// Forward differences, smoothing, and the residual variance
/// `Σ δ_k² / (n - 2)` over the `n - 1` residuals.
pub fn build_derivative_series(
    series: &TimeSeries,
    smoothing: Smoothing,
) -> Result<DerivativeSeries> {
    let raw = forward_difference(series)?;
    match smoothing {
        Smoothing::PassThrough => Ok(DerivativeSeries {
            residuals: vec![0.0; raw.len()],
            smoothed: raw.clone(),
            raw,
            sigma_delta_sq: 0.0,
            smoothing,
        }),
        Smoothing::MovingAverage(_) => {
            let n = series.len();
            if n < 3 {
                return Err(Error::InsufficientData(format!(
                    "smoothing-error variance needs n >= 3, got {n}"
                )));
            }
            let smoothed = smoothing.apply(&raw)?;
            let residuals: Vec<f64> = raw.iter().zip(&smoothed).map(|(r, s)| r - s).collect();
            let sigma_delta_sq = residuals.iter().map(|d| d * d).sum::<f64>() / (n - 2) as f64;
            Ok(DerivativeSeries {
                raw,
                smoothed,
                residuals,
                sigma_delta_sq,
                smoothing,
            })
        }
    }
}

/// What the embedding rows are paired with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingMode {
    /// Smoothed derivative at the window's last time stamp.
    Derivative,
    /// The observation one step past the window.
    NextValue,
}

/// Delay-embedding design matrix with its regression targets.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingDataset {
    pub design: DMatrix<f64>,
    pub targets: Vec<f64>,
    pub embed_dim: usize,
    pub mode: EmbeddingMode,
}

impl EmbeddingDataset {
    pub fn rows(&self) -> usize {
        self.targets.len()
    }
}

/// Builds the `(n - m) × m` lag matrix. `deriv` is required in derivative mode
/// and must come from `series`.
pub fn build_embedding(
    series: &TimeSeries,
    deriv: Option<&DerivativeSeries>,
    m: usize,
    mode: EmbeddingMode,
) -> Result<EmbeddingDataset> {
    let n = series.len();
    if m == 0 {
        return Err(Error::InvalidConfig(
            "embedding dimension must be positive".into(),
        ));
    }
    if m >= n {
        return Err(Error::EmbeddingTooLarge { m, n });
    }
    let rows = n - m;
    let y = series.values();
    let design = DMatrix::from_fn(rows, m, |i, j| y[i + j]);
    let targets = match mode {
        EmbeddingMode::NextValue => y[m..].to_vec(),
        EmbeddingMode::Derivative => {
            let deriv = deriv.ok_or_else(|| {
                Error::InvalidConfig("derivative embedding requires a derivative series".into())
            })?;
            if deriv.smoothed.len() != n - 1 {
                return Err(Error::ShapeError(format!(
                    "derivative series of length {} does not match series of length {n}",
                    deriv.smoothed.len()
                )));
            }
            deriv.smoothed[m - 1..].to_vec()
        }
    };
    Ok(EmbeddingDataset {
        design,
        targets,
        embed_dim: m,
        mode,
    })
}
