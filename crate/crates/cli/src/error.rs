use thiserror::Error;

/// Exit code 1 for bad input or configuration, 2 for failures while running.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("run failed: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

fn is_validation(e: &rfblt::Error) -> bool {
    use rfblt::Error as E;
    match e {
        E::Window { source, .. } => is_validation(source),
        E::InsufficientData(_)
        | E::InvalidSeries(_)
        | E::InvalidWindow { .. }
        | E::EmbeddingTooLarge { .. }
        | E::DegenerateScale(_)
        | E::InvalidDistribution(_)
        | E::ShapeError(_)
        | E::InvalidConfig(_)
        | E::EmptyPlan
        | E::Csv(_) => true,
        _ => false,
    }
}

impl From<rfblt::Error> for CliError {
    fn from(e: rfblt::Error) -> Self {
        if is_validation(&e) {
            CliError::Validation(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
