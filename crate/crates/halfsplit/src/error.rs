use thiserror::Error;

/// Errors produced by dataset loading, training, and prediction.
#[derive(Debug, Error)]
pub enum Error {
    /// A vector or matrix dimension does not match what the consumer expects.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A parameter is outside its legal range (e.g. `mu <= 0`).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An input that is structurally valid but unusable, such as an empty
    /// accumulator or an empty training view.
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// Bad user-supplied data: missing class, too few rows, unknown label.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A file failed to parse. `line` is 1-based; 0 means unknown.
    #[error("parse error at {path}:{line}: {msg}")]
    Parse {
        path: String,
        line: u64,
        msg: String,
    },

    /// A metric is undefined for the given counts (e.g. an empty confusion).
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// A numerical routine failed where the math says it should not.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A model file has an unknown version or malformed contents.
    #[error("model format: {0}")]
    ModelFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
