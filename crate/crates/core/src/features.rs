//! Frozen random feature maps `z = σ(xᵀW + bᵀ)`.

use std::f64::consts::PI;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Bernoulli, Cauchy, Distribution, Exp, LogNormal, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::rng::{domain, SeedTree};

/// Sampling law for the entries of `W` or `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DistributionSpec {
    Normal {
        mean: f64,
        std_dev: f64,
    },
    Uniform {
        low: f64,
        high: f64,
    },
    Cauchy {
        location: f64,
        scale: f64,
    },
    Exponential {
        rate: f64,
    },
    /// Values in `{0, 1}`.
    Bernoulli {
        p: f64,
    },
    LogNormal {
        mu: f64,
        sigma: f64,
    },
}

impl DistributionSpec {
    pub fn standard_normal() -> Self {
        Self::Normal {
            mean: 0.0,
            std_dev: 1.0,
        }
    }

    /// `Unif[0, 2π]`, the usual bias law for Fourier features.
    pub fn phase() -> Self {
        Self::Uniform {
            low: 0.0,
            high: 2.0 * PI,
        }
    }

    /// The family's standard parameterization, looked up by name.
    pub fn default_for(family: &str) -> Result<Self> {
        Ok(match family {
            "normal" => Self::standard_normal(),
            "uniform" => Self::phase(),
            "cauchy" => Self::Cauchy {
                location: 0.0,
                scale: 1.0,
            },
            "exponential" => Self::Exponential { rate: 1.0 },
            "bernoulli" => Self::Bernoulli { p: 0.5 },
            "lognormal" => Self::LogNormal {
                mu: 0.0,
                sigma: 1.0,
            },
            other => {
                return Err(Error::InvalidDistribution(format!(
                    "unknown family {other:?}"
                )))
            }
        })
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Normal { mean, std_dev } => {
                mean.is_finite() && std_dev.is_finite() && std_dev > 0.0
            }
            Self::Uniform { low, high } => low.is_finite() && high.is_finite() && low < high,
            Self::Cauchy { location, scale } => {
                location.is_finite() && scale.is_finite() && scale > 0.0
            }
            Self::Exponential { rate } => rate.is_finite() && rate > 0.0,
            Self::Bernoulli { p } => (0.0..=1.0).contains(&p),
            Self::LogNormal { mu, sigma } => mu.is_finite() && sigma.is_finite() && sigma > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidDistribution(format!("{self:?}")))
        }
    }

    /// Draws `count` i.i.d. values.
    pub fn sample_n<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Result<Vec<f64>> {
        self.validate()?;
        let bad = |e: &dyn fmt::Display| Error::InvalidDistribution(e.to_string());
        let out = match *self {
            Self::Normal { mean, std_dev } => {
                let d = Normal::new(mean, std_dev).map_err(|e| bad(&e))?;
                (0..count).map(|_| d.sample(rng)).collect()
            }
            Self::Uniform { low, high } => {
                let d = Uniform::new_inclusive(low, high).map_err(|e| bad(&e))?;
                (0..count).map(|_| d.sample(rng)).collect()
            }
            Self::Cauchy { location, scale } => {
                let d = Cauchy::new(location, scale).map_err(|e| bad(&e))?;
                (0..count).map(|_| d.sample(rng)).collect()
            }
            Self::Exponential { rate } => {
                let d = Exp::new(rate).map_err(|e| bad(&e))?;
                (0..count).map(|_| d.sample(rng)).collect()
            }
            Self::Bernoulli { p } => {
                let d = Bernoulli::new(p).map_err(|e| bad(&e))?;
                (0..count)
                    .map(|_| if d.sample(rng) { 1.0 } else { 0.0 })
                    .collect()
            }
            Self::LogNormal { mu, sigma } => {
                let d = LogNormal::new(mu, sigma).map_err(|e| bad(&e))?;
                (0..count).map(|_| d.sample(rng)).collect()
            }
        };
        Ok(out)
    }
}

/// Nonlinearity applied to the random projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    /// `√(2/D)·cos(·)`.
    #[default]
    Fourier,
    Relu,
    Sigmoid,
    Tanh,
    Sine,
    Cosine,
}

impl Activation {
    /// Applies the activation to one pre-activation value; `n_features` only matters for Fourier.
    #[inline]
    pub fn apply(self, u: f64, n_features: usize) -> f64 {
        match self {
            Activation::Fourier => (2.0 / n_features as f64).sqrt() * u.cos(),
            Activation::Relu => u.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-u).exp()),
            Activation::Tanh => u.tanh(),
            Activation::Sine => u.sin(),
            Activation::Cosine => u.cos(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Fourier => "fourier",
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
            Activation::Sine => "sine",
            Activation::Cosine => "cosine",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "fourier" => Activation::Fourier,
            "relu" => Activation::Relu,
            "sigmoid" => Activation::Sigmoid,
            "tanh" => Activation::Tanh,
            "sine" | "sin" => Activation::Sine,
            "cosine" | "cos" => Activation::Cosine,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown activation {other:?}"
                )))
            }
        })
    }
}

/// How many random features to draw for a given number of training rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FeatureCount {
    /// `ceil(n / 2)`.
    #[default]
    HalfRows,
    Fixed(usize),
    /// `ceil(√n)`.
    SqrtRows,
    /// `ceil(c·n)`.
    Multiplier(f64),
}

impl FeatureCount {
    pub fn resolve(self, n_rows: usize) -> Result<usize> {
        let d = match self {
            FeatureCount::HalfRows => default_feature_count(n_rows),
            FeatureCount::Fixed(d) => d,
            FeatureCount::SqrtRows => (n_rows as f64).sqrt().ceil() as usize,
            FeatureCount::Multiplier(c) => {
                if !(c.is_finite() && c > 0.0) {
                    return Err(Error::InvalidConfig(format!(
                        "feature multiplier {c} must be positive"
                    )));
                }
                (c * n_rows as f64).ceil() as usize
            }
        };
        if d == 0 {
            return Err(Error::InvalidConfig(
                "number of features must be positive".into(),
            ));
        }
        Ok(d)
    }
}

impl FromStr for FeatureCount {
    type Err = Error;

    /// `half`, `sqrt`, a fixed count such as `86`, or a multiplier such as `1.5x`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let bad = || Error::InvalidConfig(format!("unrecognised feature count {s:?}"));
        match s.as_str() {
            "half" => Ok(FeatureCount::HalfRows),
            "sqrt" => Ok(FeatureCount::SqrtRows),
            _ => match s.strip_suffix('x') {
                Some(c) => c.parse().map(FeatureCount::Multiplier).map_err(|_| bad()),
                None => s.parse().map(FeatureCount::Fixed).map_err(|_| bad()),
            },
        }
    }
}

/// `ceil(n_rows / 2)`.
pub fn default_feature_count(n_rows: usize) -> usize {
    n_rows.div_ceil(2)
}

/// Random weights `W` (m×D), biases `b` (D) and an activation. Never resampled once built.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    weights: DMatrix<f64>,
    biases: DVector<f64>,
    activation: Activation,
}

/// Draws `W` and `b` from independent streams under `seed`.
pub fn sample_feature_map(
    input_dim: usize,
    n_features: usize,
    weights: &DistributionSpec,
    biases: &DistributionSpec,
    activation: Activation,
    seed: SeedTree,
) -> Result<FeatureMap> {
    if input_dim == 0 || n_features == 0 {
        return Err(Error::InvalidConfig(format!(
            "feature map needs m >= 1 and D >= 1, got m={input_dim}, D={n_features}"
        )));
    }
    weights.validate()?;
    biases.validate()?;
    let w = weights.sample_n(
        input_dim * n_features,
        &mut seed.stream(&[domain::FEATURE_WEIGHTS]),
    )?;
    let b = biases.sample_n(n_features, &mut seed.stream(&[domain::FEATURE_BIASES]))?;
    FeatureMap::from_parts(
        DMatrix::from_row_slice(input_dim, n_features, &w),
        DVector::from_vec(b),
        activation,
    )
}

impl FeatureMap {
    pub fn from_parts(
        weights: DMatrix<f64>,
        biases: DVector<f64>,
        activation: Activation,
    ) -> Result<Self> {
        if weights.ncols() != biases.len() {
            return Err(Error::ShapeError(format!(
                "W has {} columns but b has {} entries",
                weights.ncols(),
                biases.len()
            )));
        }
        if weights.nrows() == 0 || weights.ncols() == 0 {
            return Err(Error::ShapeError("empty feature map".into()));
        }
        if weights.iter().chain(biases.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NumericalError(
                "feature map has non-finite entries".into(),
            ));
        }
        Ok(Self {
            weights,
            biases,
            activation,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.weights.ncols()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn biases(&self) -> &DVector<f64> {
        &self.biases
    }

    fn transform_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.n_features();
        for (j, o) in out.iter_mut().enumerate() {
            let col = self.weights.column(j);
            let mut u = self.biases[j];
            for (xi, wij) in x.iter().zip(col.iter()) {
                u += xi * wij;
            }
            *o = self.activation.apply(u, d);
        }
    }

    /// Features of one lag vector.
    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::ShapeError(format!(
                "input of length {} for feature map with input dimension {}",
                x.len(),
                self.input_dim()
            )));
        }
        let mut out = vec![0.0; self.n_features()];
        self.transform_into(x, &mut out);
        Ok(out)
    }

    /// Features of every row of `design`. Rows are independent, so parallel
    /// and sequential execution give bit-identical results.
    pub fn transform_batch(&self, design: &DMatrix<f64>, exec: Execution) -> Result<DMatrix<f64>> {
        if design.ncols() != self.input_dim() {
            return Err(Error::ShapeError(format!(
                "design has {} columns for feature map with input dimension {}",
                design.ncols(),
                self.input_dim()
            )));
        }
        let d = self.n_features();
        let rows = exec.map_indexed(design.nrows(), |i| {
            let x: Vec<f64> = design.row(i).iter().copied().collect();
            let mut z = vec![0.0; d];
            self.transform_into(&x, &mut z);
            z
        });
        Ok(DMatrix::from_fn(design.nrows(), d, |i, j| rows[i][j]))
    }

    /// Text dump for audits: `W` row-major (one line per input dimension),
    /// then `b` on one line, then `#`-prefixed metadata.
    pub fn write_dump<W: Write>(&self, mut w: W) -> Result<()> {
        let line = |vals: &mut dyn Iterator<Item = f64>| {
            vals.map(|v| format!("{v:e}")).collect::<Vec<_>>().join(" ")
        };
        for r in 0..self.input_dim() {
            writeln!(w, "{}", line(&mut self.weights.row(r).iter().copied()))?;
        }
        writeln!(w, "{}", line(&mut self.biases.iter().copied()))?;
        writeln!(w, "# activation={}", self.activation)?;
        writeln!(w, "# input_dim={}", self.input_dim())?;
        writeln!(w, "# n_features={}", self.n_features())?;
        Ok(())
    }

    pub fn read_dump<R: BufRead>(r: R) -> Result<Self> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut activation = None;
        for line in r.lines() {
            let line = line?;
            let line = line.trim();
            if let Some(meta) = line.strip_prefix('#') {
                if let Some(a) = meta.trim().strip_prefix("activation=") {
                    activation = Some(a.parse::<Activation>()?);
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let row = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|_| Error::InvalidConfig(format!("bad number {t:?} in dump")))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        let activation =
            activation.ok_or_else(|| Error::InvalidConfig("dump lacks activation".into()))?;
        let b = rows
            .pop()
            .ok_or_else(|| Error::InvalidConfig("empty dump".into()))?;
        if rows.is_empty() || rows.iter().any(|r| r.len() != b.len()) {
            return Err(Error::ShapeError("ragged feature map dump".into()));
        }
        let m = rows.len();
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        Self::from_parts(
            DMatrix::from_row_slice(m, b.len(), &flat),
            DVector::from_vec(b),
            activation,
        )
    }
}
