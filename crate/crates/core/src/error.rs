use thiserror::Error;

use crate::model::FieldSample;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure modes shared by every module of the engine.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numeric failure: {message}")]
    NumericFailure { message: String },

    #[error("unsupported representation: {0}")]
    UnsupportedRepresentation(String),

    /// The iteration cap was hit before the stopping rule fired. The partial
    /// state is kept so callers can inspect how far the run got.
    #[error("runaway simulation: stopping rule not met after {iterations} spectral draws")]
    Runaway {
        iterations: u64,
        partial: Box<FieldSample>,
    },

    #[error("degenerate request: {0}")]
    DegenerateRequest(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::NumericFailure {
            message: msg.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
