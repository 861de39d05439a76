use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, QoctError>;

#[derive(Debug, Error)]
pub enum QoctError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no signal: coincidence baseline is zero")]
    NoSignal,

    #[error("normalization failed: {0}")]
    Normalization(String),

    #[error("internal consistency check failed: {0}")]
    InternalConsistency(String),

    #[error("no feature: {0}")]
    NoFeature(String),

    #[error("feature touches the edge of the scan grid")]
    Edge,

    #[error("out of bounds: {0}")]
    OutOfBounds(String),

    #[error("at scan position (ix={ix}, iy={iy}): {source}")]
    AtPosition {
        ix: usize,
        iy: usize,
        #[source]
        source: Box<QoctError>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
}

impl QoctError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        QoctError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        QoctError::Io {
            path: path.into(),
            source,
        }
    }
}
