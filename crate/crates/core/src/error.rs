use thiserror::Error;

use crate::strategies::StrategyKind;

/// Errors raised while building or configuring the network model.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("a topology needs at least {min} relays to populate every role, got {got}")]
    TooFewRelays { got: usize, min: usize },
    #[error("invalid model parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },
}

/// Errors from the closed-form circuit metrics.
#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum MetricError {
    #[error("bandwidth must be positive, got {0}")]
    NonPositiveBandwidth(f64),
    #[error("latency must be nonnegative, got {0}")]
    NegativeLatency(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SelectionError {
    #[error("no candidate relays to sample from")]
    NoCandidates,
    #[error("weight at position {index} is not a positive finite number ({weight})")]
    InvalidWeight { index: usize, weight: f64 },
    #[error("{candidates} candidates but {weights} weights")]
    LengthMismatch { candidates: usize, weights: usize },
    #[error("{strategy} could not build a circuit: {reason}")]
    CircuitBuildFailure {
        strategy: StrategyKind,
        reason: String,
    },
}

impl SelectionError {
    pub(crate) fn build_failure(strategy: StrategyKind, reason: impl Into<String>) -> Self {
        SelectionError::CircuitBuildFailure {
            strategy,
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot aggregate an empty circuit list")]
    EmptyAggregate,
    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed results JSON: {0}")]
    Malformed(String),
    #[error("results schema mismatch at `{field}`: {reason}")]
    Schema { field: String, reason: String },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
