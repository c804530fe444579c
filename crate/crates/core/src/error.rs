use thiserror::Error;

/// Errors produced anywhere in the pipeline.
///
/// Variants are grouped so a front end can map them onto exit codes with
/// [`Error::kind`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("incompatible: {0}")]
    Incompatible(String),

    #[error("stale cache: {0}")]
    StaleCache(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("non-finite loss {loss} at epoch {epoch}, batch {batch} (lr_lce={lr_lce}, lr_main={lr_main})")]
    NonFinite {
        loss: f64,
        epoch: usize,
        batch: usize,
        lr_lce: f64,
        lr_main: f64,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Coarse classification of an [`Error`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Compat,
    Numerical,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. }
            | Error::Parse { .. }
            | Error::InvalidInput(_)
            | Error::InvalidConfig(_)
            | Error::Checkpoint(_)
            | Error::Json(_) => ErrorKind::Input,
            Error::Shape(_) | Error::Incompatible(_) | Error::StaleCache(_) => ErrorKind::Compat,
            Error::NonFinite { .. } => ErrorKind::Numerical,
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
