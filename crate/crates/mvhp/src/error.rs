//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by model construction, evaluation, fitting, simulation,
/// and ingestion.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("process index {index} out of range (P = {p})")]
    ProcessIndexOutOfRange { index: usize, p: usize },

    #[error("event index {index} out of range for process {process} ({count} events)")]
    EventIndexOutOfRange {
        process: usize,
        index: usize,
        count: usize,
    },

    #[error("time {t} outside observation window [{t_start}, {t_end}]")]
    TimeOutsideWindow { t: f64, t_start: f64, t_end: f64 },

    #[error("reversed interval: t0 = {t0} > t1 = {t1}")]
    ReversedInterval { t0: f64, t1: f64 },

    #[error("stream for process {process} is not strictly increasing at position {position}")]
    UnsortedStream { process: usize, position: usize },

    #[error(
        "zero intensity at event {index} of process {process}; model is infeasible for this data"
    )]
    ZeroIntensityEvent { process: usize, index: usize },

    #[error("need at least {needed} events, got {got}")]
    InsufficientEvents { needed: usize, got: usize },

    #[error("no events in any stream; nothing to fit")]
    NoEvents,

    #[error("observation window has zero length")]
    EmptyWindow,

    #[error("unstable model: branching-matrix spectral radius {rho:.4} >= 1")]
    UnstableModel { rho: f64 },

    #[error("simulation exceeded the max-events cap of {cap}; model is likely supercritical")]
    MaxEventsExceeded { cap: usize },

    #[error("span [{t0}, {t1}] is shorter than one window of length {length}")]
    SpanTooShort { t0: f64, t1: f64, length: f64 },

    #[error("malformed input at line {line}: {message}")]
    MalformedRow { line: usize, message: String },

    #[error("ingest produced no streams after filtering")]
    EmptyIngest,

    #[error("unrecognized input header: {0}")]
    UnknownFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
