use std::io;

use thiserror::Error;

/// Errors raised anywhere in the crack solver pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid material: {0}")]
    InvalidMaterial(String),
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),
    #[error("unsupported value: {0}")]
    Unsupported(String),
    #[error("config parse error: {0}")]
    ConfigParse(String),
    #[error("factorization failed for {what} after {retries} shifted retries")]
    FactorizationFailed { what: String, retries: usize },
    #[error("operator is not positive definite (p^T K p = {0:e})")]
    IndefiniteOperator(f64),
    #[error("preconditioner is not positive definite (r^T z = {0:e})")]
    IndefinitePreconditioner(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
