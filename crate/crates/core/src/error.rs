use thiserror::Error;

/// Errors surfaced by the dialogue engine and its tooling.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("tracking error: {0}")]
    Tracking(String),

    #[error("session is closed")]
    SessionClosed,

    #[error("no template covers act {0}")]
    Realization(String),

    #[error("ingestion error: {}", .offenders.join("; "))]
    Ingestion { offenders: Vec<String> },

    #[error("non-finite value in {what}: {detail}")]
    NonFinite { what: String, detail: String },

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("insufficient annotations: need at least 3, got {0}")]
    InsufficientAnnotations(usize),

    #[error("degenerate statistic: {0}")]
    Degenerate(String),

    #[error("schema error in dialogue {dialogue} at {path}: {reason}")]
    Schema {
        dialogue: String,
        path: String,
        reason: String,
    },

    #[error("empty report: {0}")]
    EmptyReport(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("conflict: {0}")]
    Conflict(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
