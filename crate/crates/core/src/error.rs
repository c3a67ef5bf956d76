use thiserror::Error;

/// Errors raised by kernels, statistics and configuration handling.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("radius must be nonnegative, got {0}")]
    NegativeRadius(f64),

    #[error("probability must lie in (0, 1), got {0}")]
    ProbabilityOutOfRange(f64),

    #[error("point has dimension {got}, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point coordinates must be finite")]
    NonFinitePoint,

    #[error("operation requires a one-dimensional model, got dimension {0}")]
    NotOneDimensional(usize),

    #[error("at least {needed} points are required, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("ball probability vanishes for every radius at this point")]
    DegenerateBall,

    #[error("Stirling number S({k}, {j}) is outside the supported range k <= 20")]
    StirlingOutOfRange { k: usize, j: usize },

    #[error("density lower bound must be positive, got {0}")]
    NonPositiveDensityBound(f64),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
