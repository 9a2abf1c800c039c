//! Fitting and recursive probabilistic forecasting.
//!
//! `fit` runs: optional min-max scaling → forward differences and smoothing
//! (derivative models only) → delay embedding → random features → Gibbs
//! sampler. `forecast` then rolls every retained posterior draw forward
//! independently: each step transforms the draw's own lag vector, adds
//! observation noise `ε ~ N(0, σ_ε²)` and, for derivative models, the
//! smoothing error `δ ~ N(0, σ_δ²)`, and Euler-integrates.

use std::io::Write;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::features::{sample_feature_map, Activation, DistributionSpec, FeatureCount, FeatureMap};
use crate::gibbs::{run_chain, GibbsConfig, PosteriorDraws};
use crate::rng::{domain, SeedTree};
use crate::scaler::MinMaxScaler;
use crate::series::{
    build_derivative_series, build_embedding, EmbeddingMode, Smoothing, TimeSeries,
};

/// Which regression target the model learns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Smoothed derivative, forecasts by Euler integration.
    #[default]
    Rfblt,
    /// Next value directly, no derivative step.
    Rfbl,
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rfblt" => Ok(ModelKind::Rfblt),
            "rfbl" => Ok(ModelKind::Rfbl),
            other => Err(Error::InvalidConfig(format!(
                "unknown model kind {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    /// Embedding window `m`.
    pub embed_dim: usize,
    pub features: FeatureCount,
    pub smoothing: Smoothing,
    pub weights: DistributionSpec,
    pub biases: DistributionSpec,
    pub activation: Activation,
    /// Sampler settings; its `seed` is replaced by [`FitOptions::seed`].
    pub gibbs: GibbsConfig,
    pub normalize: bool,
    pub kind: ModelKind,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for FitOptions {
    /// Fourier features with `W ~ N(0, 1)`, `b ~ Unif[0, 2π]`, `D = ⌈rows/2⌉`,
    /// `m = 9`, 7-point left moving average on the derivatives, lasso prior
    /// with 2000/1000/5 sampling.
    fn default() -> Self {
        Self {
            embed_dim: 9,
            features: FeatureCount::HalfRows,
            smoothing: Smoothing::MovingAverage(7),
            weights: DistributionSpec::standard_normal(),
            biases: DistributionSpec::phase(),
            activation: Activation::Fourier,
            gibbs: GibbsConfig::default(),
            normalize: false,
            kind: ModelKind::Rfblt,
            seed: 0,
            execution: Execution::Parallel,
        }
    }
}

/// A fitted model: everything needed to roll forecasts forward.
#[derive(Debug, Clone)]
pub struct RfbltModel {
    pub feature_map: FeatureMap,
    pub draws: PosteriorDraws,
    /// Gibbs iteration index of each retained draw; keys the predictive noise streams.
    pub draw_ids: Vec<u64>,
    pub sigma_delta_sq: f64,
    pub smoothing: Smoothing,
    pub embed_dim: usize,
    pub scaler: Option<MinMaxScaler>,
    pub kind: ModelKind,
    /// Last `m` training values, in model (scaled) units.
    pub tail: Vec<f64>,
    pub last_time: f64,
    pub mean_step: f64,
    pub seed: u64,
    pub execution: Execution,
}

/// Fits a model on the whole of `series`.
pub fn fit(series: &TimeSeries, options: &FitOptions) -> Result<RfbltModel> {
    let n = series.len();
    let m = options.embed_dim;
    if m == 0 {
        return Err(Error::InvalidConfig(
            "embedding dimension must be positive".into(),
        ));
    }
    if n <= m + 2 {
        return Err(Error::InsufficientData(format!(
            "series of length {n} is too short for embedding dimension {m} (need n > m + 2)"
        )));
    }
    let scaler = if options.normalize {
        Some(MinMaxScaler::fit(series.values())?)
    } else {
        None
    };
    let working = match &scaler {
        Some(s) => series.with_values(s.apply_all(series.values()))?,
        None => series.clone(),
    };

    let (dataset, sigma_delta_sq, smoothing) = match options.kind {
        ModelKind::Rfblt => {
            let deriv = build_derivative_series(&working, options.smoothing)?;
            let ds = build_embedding(&working, Some(&deriv), m, EmbeddingMode::Derivative)?;
            (ds, deriv.sigma_delta_sq, options.smoothing)
        }
        ModelKind::Rfbl => (
            build_embedding(&working, None, m, EmbeddingMode::NextValue)?,
            0.0,
            Smoothing::PassThrough,
        ),
    };

    let root = SeedTree::new(options.seed);
    let d = options.features.resolve(dataset.rows())?;
    let feature_map = sample_feature_map(
        m,
        d,
        &options.weights,
        &options.biases,
        options.activation,
        root,
    )?;
    let z = feature_map.transform_batch(&dataset.design, options.execution)?;
    let gibbs = GibbsConfig {
        seed: options.seed,
        ..options.gibbs.clone()
    };
    let draws = run_chain(&dataset.targets, &z, &gibbs, gibbs.prior)?;
    let draw_ids = (1..=gibbs.n_samples as u64)
        .filter(|&s| {
            s > gibbs.burn_in as u64 && (s - gibbs.burn_in as u64).is_multiple_of(gibbs.thin as u64)
        })
        .collect();

    Ok(RfbltModel {
        feature_map,
        draws,
        draw_ids,
        sigma_delta_sq,
        smoothing,
        embed_dim: m,
        scaler,
        kind: options.kind,
        tail: working.values()[n - m..].to_vec(),
        last_time: series.last_time(),
        mean_step: series.mean_step(),
        seed: options.seed,
        execution: options.execution,
    })
}

/// Linear-interpolation sample quantile (the "type 7" rule) of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    if lo + 1 >= n {
        return sorted[n - 1];
    }
    sorted[lo] + (h - lo as f64) * (sorted[lo + 1] - sorted[lo])
}

impl RfbltModel {
    /// Rolls draw `s` forward over `times`. `observe(k, lag)` sees each step's lag vector.
    fn roll_path<F: FnMut(usize, &[f64])>(
        &self,
        s: usize,
        times: &[f64],
        mut observe: F,
    ) -> Result<Vec<f64>> {
        let beta0 = self.draws.beta0[s];
        let beta = self.draws.beta.row(s);
        let sigma_eps = self.draws.sigma_eps_sq[s].sqrt();
        let sigma_delta = self.sigma_delta_sq.sqrt();
        let stream = SeedTree::new(self.seed).descend(&[domain::PREDICTIVE, self.draw_ids[s]]);

        let mut lag = self.tail.clone();
        let mut prev_t = self.last_time;
        let mut out = Vec::with_capacity(times.len());
        for (k, &t) in times.iter().enumerate() {
            observe(k, &lag);
            let mut rng = stream.stream(&[k as u64]);
            let z = self.feature_map.transform(&lag)?;
            let mean: f64 = beta0 + z.iter().zip(beta.iter()).map(|(a, b)| a * b).sum::<f64>();
            let eps: f64 = StandardNormal.sample(&mut rng);
            let predicted = mean + sigma_eps * eps;
            let next = match self.kind {
                ModelKind::Rfblt => {
                    let delta: f64 = StandardNormal.sample(&mut rng);
                    let slope = predicted + sigma_delta * delta;
                    lag[self.embed_dim - 1] + slope * (t - prev_t)
                }
                ModelKind::Rfbl => predicted,
            };
            if !next.is_finite() {
                return Err(Error::NumericalError(format!(
                    "non-finite prediction from posterior draw {s} at step {}",
                    k + 1
                )));
            }
            lag.rotate_left(1);
            lag[self.embed_dim - 1] = next;
            prev_t = t;
            out.push(next);
        }
        Ok(out)
    }

    /// Future time stamps spaced by the mean training step.
    pub fn horizon_times(&self, h: usize) -> Vec<f64> {
        (1..=h)
            .map(|k| self.last_time + k as f64 * self.mean_step)
            .collect()
    }

    pub fn forecast(&self, h: usize, alpha: f64) -> Result<ForecastResult> {
        self.forecast_at(&self.horizon_times(h), alpha, self.execution)
    }

    /// Forecast at explicit future time stamps (strictly increasing, after the training data).
    pub fn forecast_at(
        &self,
        times: &[f64],
        alpha: f64,
        exec: Execution,
    ) -> Result<ForecastResult> {
        if times.is_empty() {
            return Err(Error::InvalidConfig(
                "forecast horizon must be at least 1".into(),
            ));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in (0, 1), got {alpha}"
            )));
        }
        let mut prev = self.last_time;
        for &t in times {
            if t.is_nan() || t <= prev {
                return Err(Error::InvalidConfig(
                    "forecast times must increase past the training data".into(),
                ));
            }
            prev = t;
        }
        let n_draws = self.draws.len();
        let paths = exec.try_map_indexed(n_draws, |s| self.roll_path(s, times, |_, _| {}))?;
        let h = times.len();
        let sample_paths = DMatrix::from_fn(n_draws, h, |s, k| match &self.scaler {
            Some(sc) => sc.invert(paths[s][k]),
            None => paths[s][k],
        });
        ForecastResult::from_paths(times.to_vec(), sample_paths, alpha)
    }

    /// Lag vectors used at each step of draw `s` over an `h`-step horizon (model units).
    pub fn lag_trace(&self, s: usize, h: usize) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        if s >= self.draws.len() {
            return Err(Error::InvalidConfig(format!("draw {s} out of range")));
        }
        let mut lags = Vec::with_capacity(h);
        let path = self.roll_path(s, &self.horizon_times(h), |_, lag| lags.push(lag.to_vec()))?;
        Ok((lags, path))
    }

    /// Same model with draws reordered by `perm`.
    pub fn with_permuted_draws(&self, perm: &[usize]) -> Self {
        Self {
            draws: self.draws.permuted(perm),
            draw_ids: perm.iter().map(|&i| self.draw_ids[i]).collect(),
            ..self.clone()
        }
    }
}

/// Per-horizon summaries and the raw predictive paths, in original units.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastResult {
    pub horizon_times: Vec<f64>,
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Draws × horizon.
    pub sample_paths: DMatrix<f64>,
    pub alpha: f64,
}

impl ForecastResult {
    /// Summarizes each column: arithmetic mean and `α/2`, `1 − α/2` quantiles.
    pub fn from_paths(
        horizon_times: Vec<f64>,
        sample_paths: DMatrix<f64>,
        alpha: f64,
    ) -> Result<Self> {
        if sample_paths.ncols() != horizon_times.len() || sample_paths.nrows() == 0 {
            return Err(Error::ShapeError(format!(
                "sample paths {:?} for {} horizon steps",
                sample_paths.shape(),
                horizon_times.len()
            )));
        }
        let h = horizon_times.len();
        let mut mean = Vec::with_capacity(h);
        let mut lower = Vec::with_capacity(h);
        let mut upper = Vec::with_capacity(h);
        for k in 0..h {
            let mut col: Vec<f64> = sample_paths.column(k).iter().copied().collect();
            mean.push(col.iter().sum::<f64>() / col.len() as f64);
            col.sort_by(|a, b| a.total_cmp(b));
            lower.push(quantile_sorted(&col, alpha / 2.0));
            upper.push(quantile_sorted(&col, 1.0 - alpha / 2.0));
        }
        Ok(Self {
            horizon_times,
            mean,
            lower,
            upper,
            sample_paths,
            alpha,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon_times.len()
    }

    /// Posterior predictive mean per step.
    pub fn point_forecast(&self) -> &[f64] {
        &self.mean
    }

    /// `time,mean,lower,upper`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["time", "mean", "lower", "upper"])?;
        for k in 0..self.horizon() {
            w.write_record([
                self.horizon_times[k].to_string(),
                self.mean[k].to_string(),
                self.lower[k].to_string(),
                self.upper[k].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// One row per draw: `draw,step_1..step_h`.
    pub fn write_paths_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["draw".to_string()];
        header.extend((1..=self.horizon()).map(|k| format!("step_{k}")));
        w.write_record(&header)?;
        for s in 0..self.sample_paths.nrows() {
            let mut rec = vec![s.to_string()];
            rec.extend(self.sample_paths.row(s).iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(kind: ModelKind, seed: u64) -> FitOptions {
        FitOptions {
            embed_dim: 3,
            gibbs: GibbsConfig {
                n_samples: 300,
                burn_in: 100,
                thin: 2,
                ..Default::default()
            },
            kind,
            seed,
            ..Default::default()
        }
    }

    fn wave(n: usize) -> TimeSeries {
        TimeSeries::regular(
            0.0,
            (0..n)
                .map(|i| (i as f64 * 0.3).sin() + 0.01 * i as f64)
                .collect(),
            "wave",
        )
        .unwrap()
    }

    #[test]
    fn quantile_type7() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&x, 0.0), 1.0);
        assert_eq!(quantile_sorted(&x, 1.0), 4.0);
        assert_eq!(quantile_sorted(&x, 0.5), 2.5);
        assert!((quantile_sorted(&x, 0.25) - 1.75).abs() < 1e-15);
        assert_eq!(quantile_sorted(&[7.0], 0.3), 7.0);
    }

    #[test]
    fn shapes_and_determinism() {
        let s = wave(40);
        let opts = quick(ModelKind::Rfblt, 3);
        let model = fit(&s, &opts).unwrap();
        assert_eq!(model.draws.len(), 100);
        assert_eq!(model.feature_map.input_dim(), 3);
        assert_eq!(model.feature_map.n_features(), 19);
        let a = model.forecast(7, 0.05).unwrap();
        assert_eq!(a.sample_paths.shape(), (100, 7));
        let b = fit(&s, &opts).unwrap().forecast(7, 0.05).unwrap();
        assert_eq!(a, b);
        let seq = model
            .forecast_at(&model.horizon_times(7), 0.05, Execution::Sequential)
            .unwrap();
        assert_eq!(a, seq);
        for k in 0..7 {
            assert!(a.lower[k] <= a.upper[k]);
            assert_eq!(a.point_forecast()[k], a.mean[k]);
        }
        assert_eq!(
            a.horizon_times,
            (40..47).map(|t| t as f64).collect::<Vec<_>>()
        );
    }

    #[test]
    fn paper_default_retains_200_draws() {
        let s = wave(60);
        let opts = FitOptions {
            seed: 1,
            ..Default::default()
        };
        let r = fit(&s, &opts).unwrap().forecast(7, 0.05).unwrap();
        assert_eq!(r.sample_paths.shape(), (200, 7));
    }

    #[test]
    fn rejects_short_series_and_bad_alpha() {
        let s = wave(5);
        assert!(matches!(
            fit(&s, &quick(ModelKind::Rfblt, 0)),
            Err(Error::InsufficientData(_))
        ));
        let model = fit(&wave(30), &quick(ModelKind::Rfbl, 0)).unwrap();
        assert!(model.forecast(3, 0.0).is_err());
        assert!(model.forecast(0, 0.05).is_err());
    }

    #[test]
    fn constant_series_gives_constant_paths() {
        let s = TimeSeries::regular(0.0, vec![2.5; 30], "flat").unwrap();
        let model = fit(&s, &quick(ModelKind::Rfblt, 0)).unwrap();
        let r = model.forecast(5, 0.05).unwrap();
        // Constant lags make every feature column constant, so β₀ + zβ = 0 only up
        // to cancellation error.
        for v in r.sample_paths.iter() {
            assert!((v - 2.5).abs() < 1e-9, "{v}");
        }
        for m in &r.mean {
            assert!((m - 2.5).abs() < 1e-9);
        }
    }

    #[test]
    fn recursion_uses_own_predictions() {
        let s = wave(30);
        let model = fit(&s, &quick(ModelKind::Rfblt, 5)).unwrap();
        let m = model.embed_dim;
        let (lags, path) = model.lag_trace(4, 6).unwrap();
        let obs = s.values();
        for (k, lag) in lags.iter().enumerate() {
            let n_obs = m.saturating_sub(k);
            assert_eq!(&lag[..n_obs], &obs[obs.len() - n_obs..]);
            let own = &path[k.saturating_sub(m)..k];
            assert_eq!(&lag[n_obs..], own);
        }
    }

    #[test]
    fn permuting_draws_permutes_paths() {
        let s = wave(30);
        let model = fit(&s, &quick(ModelKind::Rfblt, 6)).unwrap();
        let r = model.forecast(4, 0.1).unwrap();
        let n = model.draws.len();
        let perm: Vec<usize> = (0..n).map(|i| (i * 37 + 11) % n).collect();
        let p = model.with_permuted_draws(&perm).forecast(4, 0.1).unwrap();
        for (i, &src) in perm.iter().enumerate() {
            assert_eq!(p.sample_paths.row(i), r.sample_paths.row(src));
        }
        assert_eq!(p.lower, r.lower);
        assert_eq!(p.upper, r.upper);
        for k in 0..4 {
            assert!((p.mean[k] - r.mean[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn normalization_inverts_per_path() {
        let s = TimeSeries::regular(
            0.0,
            (0..40)
                .map(|i| 1000.0 + 50.0 * (i as f64 * 0.2).sin())
                .collect(),
            "big",
        )
        .unwrap();
        let opts = FitOptions {
            normalize: true,
            ..quick(ModelKind::Rfblt, 8)
        };
        let model = fit(&s, &opts).unwrap();
        let sc = model.scaler.unwrap();
        let lo = s.values().iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = s.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!((sc.min(), sc.max()), (lo, hi));
        let r = model.forecast(5, 0.05).unwrap();
        assert!(r.mean.iter().all(|v| (800.0..1200.0).contains(v)));
        for k in 0..5 {
            let mut scaled: Vec<f64> = r
                .sample_paths
                .column(k)
                .iter()
                .map(|&v| sc.apply(v))
                .collect();
            scaled.sort_by(|a, b| a.total_cmp(b));
            assert!((sc.invert(quantile_sorted(&scaled, 0.025)) - r.lower[k]).abs() < 1e-9);
            assert!((sc.invert(quantile_sorted(&scaled, 0.975)) - r.upper[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn rfbl_emits_values_directly() {
        let s = wave(40);
        let model = fit(&s, &quick(ModelKind::Rfbl, 2)).unwrap();
        assert_eq!(model.sigma_delta_sq, 0.0);
        let r = model.forecast(3, 0.05).unwrap();
        assert!(r.mean.iter().all(|v| v.abs() < 3.0));
    }

    #[test]
    fn csv_exports() {
        let model = fit(&wave(30), &quick(ModelKind::Rfblt, 1)).unwrap();
        let r = model.forecast(3, 0.05).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("time,mean,lower,upper\n"));
        assert_eq!(text.lines().count(), 4);

        let mut buf = Vec::new();
        r.write_paths_csv(&mut buf).unwrap();
        let mut rdr = csv::Reader::from_reader(buf.as_slice());
        let rows: Vec<Vec<f64>> = rdr
            .records()
            .map(|rec| {
                rec.unwrap()
                    .iter()
                    .skip(1)
                    .map(|v| v.parse().unwrap())
                    .collect()
            })
            .collect();
        for k in 0..3 {
            let m = rows.iter().map(|r| r[k]).sum::<f64>() / rows.len() as f64;
            assert!((m - r.mean[k]).abs() < 1e-12);
        }
    }
}
