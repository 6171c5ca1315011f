use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: parse error: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{path}: layer {layer}: {message}")]
    Layer {
        path: PathBuf,
        layer: usize,
        message: String,
    },

    #[error("{path}: row {row}, column {column}: {message}")]
    Cell {
        path: PathBuf,
        row: usize,
        column: usize,
        message: String,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{features} features is too many for exact enumeration (limit {limit}); use the sampled estimator")]
    TooManyFeatures { features: usize, limit: usize },

    #[error("singular design: {0}")]
    Singular(String),

    #[error("model evaluation failed at row {row}: {message}")]
    ModelEval { row: usize, message: String },

    #[error("degenerate input: {0}")]
    Degenerate(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }
}
