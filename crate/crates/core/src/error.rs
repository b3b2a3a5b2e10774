use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("row {row}: non-positive price {price} for {label}")]
    NonPositivePrice { row: usize, label: String, price: f64 },

    #[error("row {row}: conflicting prices for ({date}, {label})")]
    ConflictingDuplicate { row: usize, date: String, label: String },

    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("series {0} has no observations")]
    EmptySeries(String),

    #[error("series {0} has zero variance")]
    ZeroVariance(String),

    #[error("unknown series label {0}")]
    UnknownLabel(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not symmetric (max deviation {0:e})")]
    Asymmetric(f64),

    #[error("correlation entry {value} outside [-1, 1]")]
    CorrelationOutOfRange { value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{what} did not converge within {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("config: {0}")]
    Config(String),

    #[error("stage {stage}: {source}")]
    Stage { stage: String, source: Box<Error> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NoConvergence { .. } => true,
            Error::Stage { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
