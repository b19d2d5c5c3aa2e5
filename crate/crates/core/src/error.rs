use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("usage: {0}")]
    Usage(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{path}: unsupported PLY vertex properties: {}", props.join(", "))]
    UnsupportedPly { path: PathBuf, props: Vec<String> },

    #[error("{path}: face {face} references vertex {index} but only {count} vertices exist")]
    FaceIndex {
        path: PathBuf,
        face: usize,
        index: i64,
        count: usize,
    },

    #[error("{path}:{line}: non-finite coordinate")]
    NonFinite { path: PathBuf, line: usize },

    #[error("non-finite score at point {index}")]
    NonFiniteScore { index: usize },

    #[error("training diverged at epoch {epoch} (loss = {loss})")]
    TrainingDiverged { epoch: usize, loss: f64 },

    #[error("bad weights file: {0}")]
    Weights(String),

    #[error("bad manifest: {0}")]
    Manifest(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    /// Process exit status: 2 usage, 3 data, 4 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 2,
            Error::NonFiniteScore { .. } | Error::TrainingDiverged { .. } => 4,
            _ => 3,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
