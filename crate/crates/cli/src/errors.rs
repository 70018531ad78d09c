use thiserror::Error;

/// Command-line failures, each mapped to a process exit code:
/// 2 for configuration problems, 3 for numerical infeasibility,
/// 4 for input/output failures.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<partialid::Error> for CliError {
    fn from(err: partialid::Error) -> Self {
        use partialid::Error::*;
        match err {
            InvalidParam(_) | DimensionMismatch(_) => CliError::Config(err.to_string()),
            Infeasible { .. }
            | Incompatible { .. }
            | Degenerate(_)
            | NotPositiveDefinite(_)
            | NonFinite(_) => CliError::Infeasible(err.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Io(err.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(err: csv::Error) -> Self {
        CliError::Io(err.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(err: serde_json::Error) -> Self {
        CliError::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
