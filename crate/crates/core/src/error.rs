use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the planning, simulation and reporting modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("candidate set is empty")]
    EmptyCandidates,

    #[error("duplicate candidate ratio {m}:{n}")]
    DuplicateCandidate { m: u32, n: u32 },

    #[error("candidate {m}:{n} exceeds max_num={max_num}")]
    CandidateExceedsMaxNum { m: u32, n: u32, max_num: u32 },

    #[error("alpha must lie in [0, 1), got {0}")]
    InvalidAlpha(f64),

    #[error("trace diverges at step {step}: {reason}")]
    TraceMismatch { step: usize, reason: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("no cost entry for {stage} at batch size {batch}")]
    MissingCost { stage: &'static str, batch: usize },

    #[error("kv capacity exceeded: {tokens} tokens > capacity {capacity}")]
    KvCapacityExceeded { tokens: u64, capacity: u64 },

    #[error("inconsistent scenario: {0}")]
    InconsistentScenario(String),

    #[error("invalid precision {bits} bits for {component} (allowed: 4, 8, 16, 32)")]
    InvalidPrecision { component: String, bits: u32 },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate manifest id {id:?} at line {line}")]
    DuplicateId { id: String, line: usize },

    #[error("entry {id:?}: {source}")]
    Entry {
        id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
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
