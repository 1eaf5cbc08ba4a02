//! Error type shared by every module of the crate.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is out of range or inconsistent.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Input outside the mathematical domain of an operation (zero vector,
    /// non-normalized distribution, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Array or tensor dimensions disagree.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Patch synthesis could not place signals within the retry budget.
    #[error("generation failed: {0}")]
    Generation(String),

    /// Training produced a non-finite loss.
    #[error("training diverged at epoch {epoch}: {detail}")]
    Divergence { epoch: usize, detail: String },

    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

/// Coarse classification used by front-ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Io,
    Numeric,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Json { source, .. } if source.is_io() => ErrorKind::Io,
            Error::Csv { source, .. } if source.is_io_error() => ErrorKind::Io,
            Error::Config(_) | Error::Shape(_) | Error::Json { .. } | Error::Csv { .. } => {
                ErrorKind::Config
            }
            Error::Io { .. } | Error::Image { .. } | Error::Checkpoint(_) => ErrorKind::Io,
            Error::Domain(_) | Error::Generation(_) | Error::Divergence { .. } => {
                ErrorKind::Numeric
            }
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }
}
