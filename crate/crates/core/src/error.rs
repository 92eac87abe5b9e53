use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("image {height}x{width} is smaller than the {window}x{window} window")]
    Window {
        height: usize,
        width: usize,
        window: usize,
    },

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("value out of domain: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),

    #[error("unknown method `{0}` (expected clgid, clgid-fast, sf or individual)")]
    UnknownMethod(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("stale replay cache: {0}")]
    Stale(String),

    #[error("numerical fault at iteration {iteration}: {message}")]
    NumericalFault { iteration: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
