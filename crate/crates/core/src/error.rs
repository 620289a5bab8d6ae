use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no trading date is shared by every symbol")]
    EmptyDateIntersection,

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("circulant embedding of size {size} has negative eigenvalue {worst:e}")]
    EmbeddingFailed { size: usize, worst: f64 },

    #[error("MRW fit invalid: {0}")]
    MrwFitInvalid(String),

    #[error("too few points: need at least {needed}, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("all {windows} windows failed to produce a valid estimate (first: {first})")]
    AllWindowsFailed { windows: usize, first: String },

    #[error("window {label}: {source}")]
    Window {
        label: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn in_window(self, label: impl Into<String>) -> Self {
        Error::Window {
            label: label.into(),
            source: Box::new(self),
        }
    }
}
