use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("arity mismatch: variable index {index} but binding has {arity} values")]
    ArityMismatch { index: usize, arity: usize },

    #[error("parse error at position {position}: {message}")]
    Parse { position: usize, message: String },

    /// Line-oriented files (templates, CSV, config). Lines and rows are 1-based.
    #[error("{what} line {line}: {message}")]
    Format {
        what: &'static str,
        line: usize,
        message: String,
    },

    #[error("image format error: {0}")]
    Image(String),

    #[error("out of bounds: ({x}, {y}) in {width}x{height} image")]
    OutOfBounds {
        x: usize,
        y: usize,
        width: usize,
        height: usize,
    },

    #[error("template has no {0} formula but the candidate carries {0} points")]
    MissingFormula(&'static str),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
