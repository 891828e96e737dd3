use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error in {path}: {message}")]
    Csv { path: PathBuf, message: String },

    #[error("{path}: row {row}, column '{column}': cannot parse '{value}' as a number")]
    ParseCell {
        path: PathBuf,
        row: usize,
        column: String,
        value: String,
    },

    #[error("{path}: row {row}: label '{value}' is not +1 or -1")]
    InvalidLabel {
        path: PathBuf,
        row: usize,
        value: String,
    },

    #[error("{path}: no data rows")]
    EmptyFile { path: PathBuf },

    #[error("{path}: label column '{column}' not found")]
    MissingColumn { path: PathBuf, column: String },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite kernel entry at ({row}, {col})")]
    NonFiniteGram { row: usize, col: usize },

    #[error("solver did not converge after {iterations} iterations (max KKT violation {violation:e})")]
    NotConverged { iterations: usize, violation: f64 },

    #[error("every value on the curve is the +inf sentinel")]
    NoFiniteValues,

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
