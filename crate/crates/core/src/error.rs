use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite coordinate at index {0}")]
    NonFinite(usize),

    #[error("radius must be positive, got {0}")]
    NonPositiveRadius(f64),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("sequence of length {len} is shorter than gram length {k}")]
    SequenceTooShort { len: usize, k: usize },

    #[error("gram length mismatch: {0} vs {1}")]
    GramMismatch(usize, usize),

    #[error("index {index} out of range for working set of size {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("update rule {0} requires a stored working set")]
    MissingWorkingSet(&'static str),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("attack stalled: no working-set cell intersects the acceptance ball")]
    Stalled,

    #[error("solver did not converge within {0} iterations")]
    NotConverged(usize),

    #[error("malformed {what}: {reason}")]
    Format { what: &'static str, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
