use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the certification pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("shape error in layer {layer}: {message}")]
    Shape { layer: usize, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index out of range: {0}")]
    OutOfRange(String),

    /// A problem exceeded a configured size guard (e.g. too many unstable ReLUs for an exact solve).
    #[error("size guard exceeded: {0}")]
    Guard(String),

    /// The solver reached a state that must be impossible for well-formed input.
    #[error("internal solver error: {0}")]
    Solver(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(layer: usize, message: impl Into<String>) -> Self {
        Error::Shape {
            layer,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
