use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid setup: bad dimensions, missing point sets, unknown derivative requests.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A non-finite value was produced; `op` names the operation that produced it.
    #[error("non-finite value {value} produced by `{op}`")]
    Numeric { op: String, value: f64 },

    #[error("derivative order {0} is not supported (maximum is 2)")]
    UnsupportedOrder(usize),

    #[error("{0}")]
    Unavailable(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("training aborted at epoch {epoch}: {reason}")]
    Aborted {
        epoch: usize,
        reason: String,
        last_checkpoint: Option<Box<crate::network::Checkpoint>>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {detail}")]
    Format { path: PathBuf, detail: String },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
