use thiserror::Error;

/// Errors raised by estimators, environments, and the CLI layer.
#[derive(Debug, Error)]
pub enum Error {
    /// The full-support (overlap) assumption is broken: an action with
    /// positive target probability has a non-positive logging propensity.
    #[error("overlap violation: logging propensity {logging_propensity} is not positive")]
    OverlapViolation { logging_propensity: f64 },

    #[error("weight sequence has {weights} entries but the dataset has {records} records")]
    LengthMismatch { weights: usize, records: usize },

    #[error("estimate requires a non-empty dataset")]
    EmptyDataset,

    #[error("invalid clipping configuration: {0}")]
    InvalidClip(String),

    #[error("invalid record: {0}")]
    InvalidRecord(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("invalid environment: {0}")]
    InvalidEnvironment(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("the exact oracle supports tabular environments only")]
    UnsupportedEnvironment,

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
