use thiserror::Error;

/// Problems with a request trace: ordering, sizes, or the CSV encoding.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum TraceError {
    #[error("trace is not sorted by time at event index {index}")]
    UnsortedTrace { index: usize },
    #[error("object {object} changes size at event index {index} ({expected} -> {found} bytes)")]
    InconsistentSize {
        index: usize,
        object: String,
        expected: u64,
        found: u64,
    },
    #[error(
        "object {object} at event index {index} is {size} bytes, cache capacity is {capacity}"
    )]
    ObjectLargerThanCache {
        index: usize,
        object: String,
        size: u64,
        capacity: u64,
    },
    #[error("event index {index} is invalid: {reason}")]
    InvalidEvent { index: usize, reason: String },
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("trace is empty")]
    EmptyTrace,
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for TraceError {
    fn from(e: std::io::Error) -> Self {
        TraceError::Io(e.to_string())
    }
}

/// Invalid parameters passed to the delay model or the ranking functions.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("latency must be positive, got {0}")]
    NonPositiveLatency(f64),
    #[error("arrival rate must be non-negative, got {0}")]
    NegativeRate(f64),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("arrival at {time} precedes last recorded time {last}")]
    TimeRegression { time: f64, last: f64 },
    #[error("object has no recorded arrivals")]
    UnknownObject,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("cannot fit {needed} bytes even after evicting every cached object")]
    CannotFit { needed: u64 },
    #[error(
        "unknown policy '{0}', expected one of: lru, va-stoch, va-det, lac, cala, mad, hist-va"
    )]
    UnknownPolicy(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid synthetic workload spec: {0}")]
    InvalidSpec(String),
    #[error("baseline latency is zero, improvement is undefined")]
    ZeroBaseline,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
