//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by divergence evaluation, model training, data loading,
/// and the experiment harness.
#[derive(Debug, Error)]
pub enum OdaError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("domain violation: {0}")]
    DomainViolation(String),

    #[error("zero mass: all weights are zero")]
    ZeroMass,

    #[error("no seed codevectors supplied")]
    EmptySeeds,

    #[error("duplicate seed for class {0}")]
    DuplicateClassSeed(usize),

    #[error("seed labels must be all present (classification) or all absent (clustering)")]
    MixedSeedLabels,

    #[error("unknown class label {0}")]
    UnknownLabel(usize),

    #[error("model has no codevectors; initialize it first")]
    NotInitialized,

    #[error("temperature schedule exhausted: T is already at or below t_min")]
    ScheduleExhausted,

    #[error("codevector capacity reached: k_max = {0}")]
    CapacityReached(usize),

    #[error("model is a clustering model; labels are required for this operation")]
    NotClassifier,

    #[error("file not found: {0}")]
    FileNotFound(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    ParseError {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("too few samples: need at least {needed}, have {have}")]
    TooFewSamples { needed: usize, have: usize },

    #[error("invalid config at `{field}`: {message}")]
    InvalidConfig { field: String, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, OdaError>;
