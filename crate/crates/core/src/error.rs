use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: not an embedding file (bad magic or unknown extension)")]
    MagicMismatch { path: PathBuf },

    #[error("payload length mismatch: expected {expected} values, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value at row {row}")]
    NonFiniteValue { row: usize },

    #[error("sidecar lists {found} event ids but the file holds {expected} rows")]
    IdCountMismatch { expected: usize, found: usize },

    #[error("I/O failure: {0}")]
    IoFailure(#[from] std::io::Error),

    #[error("parse error at line {line}: {message}")]
    ParseError { line: usize, message: String },

    #[error("invariant violation: {0}")]
    InvariantViolation(String),

    #[error("no class survives the annotation threshold")]
    EmptyResult,

    #[error("class {class} has {count} members, at least 3 are required for splitting")]
    TooFewMembers { class: usize, count: usize },

    #[error("k = {k} exceeds the number of points ({n})")]
    KTooLarge { k: usize, n: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },

    #[error("k = {k} exceeds the training set size ({n})")]
    KExceedsTrain { k: usize, n: usize },

    #[error("class index {class} is outside the class universe of size {n_classes}")]
    UnknownClass { class: usize, n_classes: usize },

    #[error("class {class} has no test samples")]
    EmptyClass { class: usize },

    #[error("curve fit did not reduce the residual")]
    FitDiverged,

    #[error("spectral initialization failed: {0}")]
    SpectralFailure(String),

    #[error("non-finite coordinate at epoch {epoch}, point {point}")]
    NonFiniteCoordinate { epoch: usize, point: usize },

    #[error("{count} event ids could not be aligned between embeddings and annotations")]
    MissingEvents { count: usize },

    #[error("model {0:?} is not in the registry")]
    RegistryMiss(String),

    #[error("non-finite input coordinate at row {row}")]
    NonFiniteInput { row: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
