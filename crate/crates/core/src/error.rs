use thiserror::Error;

/// Errors surfaced by environments, policies, estimators and the run loops.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parameter shape mismatch: expected dimension {expected}, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("importance weight overflow: log-weight {log_weight:.3} exceeds limit")]
    WeightOverflow { log_weight: f64 },

    #[error("enumeration would produce {leaves} trajectories (limit {limit})")]
    EnumerationTooLarge { leaves: f64, limit: usize },

    #[error("diagnostic unavailable: {0}")]
    DiagnosticUnavailable(String),

    #[error("empty batch")]
    EmptyBatch,

    #[error("run aborted at epoch {epoch}, step {step}: {reason}")]
    Aborted {
        epoch: usize,
        step: usize,
        reason: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
