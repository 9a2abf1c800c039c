//! Random-feature Bayesian lasso forecasting on delay embeddings.
//!
//! The pipeline: forward differences of a series are (optionally) smoothed,
//! lag windows of the series are mapped through a frozen random feature map,
//! a Gibbs-sampled Bayesian lasso regresses the smoothed derivative on those
//! features, and forecasts are produced recursively per posterior draw by
//! Euler integration. The crate also ships an SμEIR epidemic simulator for
//! benchmark data, Holt's linear trend as a baseline, and an expanding-window
//! evaluation harness.

pub mod error;
pub mod eval;
pub mod exec;
pub mod features;
pub mod forecast;
pub mod gibbs;
pub mod rng;
pub mod scaler;
pub mod series;
pub mod sueir;

pub use error::{Error, Result};
pub use exec::Execution;
pub use features::{sample_feature_map, Activation, DistributionSpec, FeatureCount, FeatureMap};
pub use forecast::{fit, FitOptions, ForecastResult, ModelKind, RfbltModel};
pub use gibbs::{GibbsConfig, PosteriorDraws, Prior};
pub use rng::SeedTree;
pub use scaler::MinMaxScaler;
pub use series::{EmbeddingMode, Smoothing, TimeSeries};
