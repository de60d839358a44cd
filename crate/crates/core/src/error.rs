use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} values, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty reference set")]
    EmptyReferenceSet,

    #[error("{path}:{line}: expected {expected} fields, found {found}")]
    RaggedRow {
        path: PathBuf,
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("{path}:{line}: attribute {column} is not a finite number: {value:?}")]
    NonNumericCell {
        path: PathBuf,
        line: usize,
        column: usize,
        value: String,
    },

    #[error("{path}:{line}: test label {label:?} never appears in the training partition")]
    UnseenTestLabel { path: PathBuf, line: usize, label: String },

    #[error("dataset {dataset}: expected {expected} {partition} instances, found {found}")]
    SizeMismatch {
        dataset: String,
        partition: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid dataset spec {path}: {message}")]
    InvalidSpec { path: PathBuf, message: String },

    #[error("malformed model file, line {line}: {message}")]
    MalformedModel { line: usize, message: String },

    #[error("malformed records file {path}: {message}")]
    MalformedRecords { path: PathBuf, message: String },

    #[error("checksum mismatch for {path}: expected {expected}, got {actual}")]
    ChecksumMismatch {
        path: PathBuf,
        expected: String,
        actual: String,
    },

    #[error("download of {url} failed: {message}")]
    Download { url: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
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
