use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the ranking pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed JSON at line {line}, column {column}: {message}")]
    Json {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("duplicate image id {0:?}")]
    DuplicateImageId(String),

    #[error("image {image_id:?}: {what} has {found} entries, expected {expected}")]
    Dimensionality {
        image_id: String,
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("image {image_id:?}: {message}")]
    InvalidRecord { image_id: String, message: String },

    #[error("centroid of an empty set is undefined")]
    UndefinedCentroid,

    #[error("attribute vectors differ in length ({0} vs {1})")]
    AttributeLengthMismatch(usize, usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("brute-force enumeration refused: {count} mappings exceed the cap of {cap}")]
    EnumerationCap { count: u128, cap: u128 },

    #[error("image {0:?} not found")]
    UnknownImage(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(err: serde_json::Error) -> Self {
        Error::Json {
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
