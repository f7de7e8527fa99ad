use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised while generating, transforming or serializing datasets.
#[derive(Debug, Error)]
pub enum Error {
    /// A generator or effect received an out-of-range parameter.
    #[error("invalid parameter `{field}`: {reason}")]
    Parameter { field: String, reason: String },

    /// Dimensions that cannot be realized (empty modes, overflow, rows < cols).
    #[error("shape error: {0}")]
    Shape(String),

    /// Containers whose parts disagree with each other.
    #[error("structural error: {0}")]
    Structural(String),

    /// A model that cannot be normalized (e.g. an all-zero factor column).
    #[error("degenerate model: {0}")]
    Degenerate(String),

    /// Failures of numerical calibration such as SNR on a zero-norm tensor.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Config file violations, with the JSON path of the offending field.
    #[error("config error at `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("refusing to overwrite existing file {0}")]
    Collision(PathBuf),

    /// A file that exists but does not parse as a dataset of this tool.
    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("unsupported format version `{found}` (this build reads `{expected}`)")]
    Version { found: String, expected: String },
}

impl Error {
    pub(crate) fn param(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Parameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// Coarse classification used by front ends to choose exit codes.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Parameter { .. }
            | Error::Shape(_)
            | Error::Structural(_)
            | Error::Config { .. } => ErrorKind::Validation,
            Error::Degenerate(_) | Error::Numerical(_) => ErrorKind::Numerical,
            Error::Io { .. }
            | Error::Collision(_)
            | Error::Format { .. }
            | Error::Version { .. } => ErrorKind::Io,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Io,
    Numerical,
}
