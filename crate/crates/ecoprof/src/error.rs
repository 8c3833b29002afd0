//! Error types shared across the profiler.

use thiserror::Error;

/// Errors produced by profiling, trace handling, and report generation.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a documented precondition or range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Not enough samples to perform the requested computation.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// A power trace violated ordering or value constraints.
    #[error("malformed trace: {0}")]
    MalformedTrace(String),

    /// A quantization layer spec was structurally invalid.
    #[error("invalid quantization spec: {0}")]
    InvalidSpec(String),

    /// The sustainability score is undefined for the given emissions.
    #[error("sustainability score undefined: {0}")]
    UndefinedScore(String),

    /// Region id not present in the shipped region table.
    #[error("unknown region '{id}'; available regions: {available}")]
    UnknownRegion { id: String, available: String },

    /// Line-addressed parse failure in a CSV or key=value file.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// No live hardware power probe could be opened.
    #[error("no live power probe available: {0}")]
    ProbeUnavailable(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization failed: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
