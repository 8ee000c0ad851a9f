use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("training failed: {0}")]
    Training(String),

    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps a training error with the coordinates of the run that produced it.
    pub fn with_context(self, ctx: &str) -> Self {
        match self {
            Error::Training(msg) => Error::Training(format!("{ctx}: {msg}")),
            Error::InsufficientData(msg) => Error::InsufficientData(format!("{ctx}: {msg}")),
            Error::Degenerate(msg) => Error::Degenerate(format!("{ctx}: {msg}")),
            other => other,
        }
    }
}
