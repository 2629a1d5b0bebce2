use std::io;

use thiserror::Error;

/// Problems with a single input line, independent of its position in the stream.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("expected at least 4 tokens (timestamp, two nodes, weight), found {0}")]
    TooFewTokens(usize),
    #[error("invalid timestamp {0:?}")]
    BadTimestamp(String),
    #[error("invalid weight {0:?}")]
    BadWeight(String),
    #[error("weight must be non-negative and finite, got {0}")]
    NegativeWeight(f64),
    #[error("clique has fewer than two distinct nodes")]
    DegenerateClique,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: ParseError,
    },
    #[error("line {line}: timestamp {timestamp} precedes previous timestamp {previous}")]
    OutOfOrder {
        line: usize,
        timestamp: i64,
        previous: i64,
    },
    #[error("time moved backwards: {requested} < {current}")]
    TimeRegression { requested: f64, current: f64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("update line {line}: {reason}")]
    Apply { line: usize, reason: String },
    #[error("lockstep violation: {0}")]
    Lockstep(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
