use thiserror::Error;

/// Errors raised by the estimation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("value {value} outside the basis domain [0, 1]")]
    Domain { value: f64 },

    #[error("degenerate response range: all training responses equal {value}")]
    DegenerateRange { value: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("empty split: {0}")]
    EmptySplit(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("non-finite validation loss at cutoff {cutoff}")]
    NonFiniteLoss { cutoff: usize },

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error("unknown scenario '{0}'")]
    UnknownScenario(String),

    #[error("scenario '{0}' is not supported (defined only by external reference)")]
    OutOfScope(String),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NonFiniteLoss { .. } | Error::NumericFailure(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
