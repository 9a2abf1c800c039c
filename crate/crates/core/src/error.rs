use thiserror::Error;

/// Errors produced by the forecasting toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid time series: {0}")]
    InvalidSeries(String),
    #[error("invalid smoothing window {window} for length {len}")]
    InvalidWindow { window: usize, len: usize },
    #[error("embedding dimension {m} must be smaller than series length {n}")]
    EmbeddingTooLarge { m: usize, n: usize },
    #[error("training window is constant (min == max == {0}); cannot min-max scale")]
    DegenerateScale(f64),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("shape mismatch: {0}")]
    ShapeError(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("numerical error: {0}")]
    NumericalError(String),
    #[error("precision matrix is not positive definite after jitter escalation")]
    SingularPrecision,
    #[error("variance must be strictly positive, got {0}")]
    InvalidVariance(f64),
    #[error("integration error: {0}")]
    IntegrationError(String),
    #[error("relative error undefined: actual values are all zero")]
    UndefinedError,
    #[error("evaluation plan has no windows")]
    EmptyPlan,
    #[error("interval lower bound {lower} exceeds upper bound {upper}")]
    InvalidInterval { lower: f64, upper: f64 },
    #[error("window {window}: {source}")]
    Window {
        window: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("csv error: {0}")]
    Csv(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
