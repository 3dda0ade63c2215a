use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the clustering library.
#[derive(Debug, Error)]
pub enum CacError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("Mehler reduction needs q >= 2 (got q = {0}); use the direct tensor sum")]
    MehlerNeedsPlane(usize),

    #[error("oracle too large: {count} multi-indices exceed the cap of {cap}")]
    OracleTooLarge { count: u128, cap: u128 },

    #[error(
        "kernel matrix of {points} points needs {entries} entries (cap {cap}); \
         evaluate in row blocks of at most {suggested_block} rows"
    )]
    MatrixTooLarge {
        points: usize,
        entries: usize,
        cap: usize,
        suggested_block: usize,
    },

    #[error("invalid witness model: {0}")]
    InvalidModel(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("label query budget exhausted after {queries} queries")]
    BudgetExhausted { queries: usize },

    #[error("oracle has no label for point {index}")]
    OracleUnavailable { index: usize },

    #[error("oracle disconnected")]
    OracleDisconnected,

    #[error("parse error in {path} at row {row}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        message: String,
    },

    #[error("requested dimension {requested} exceeds achievable rank {rank}")]
    RankDeficient { requested: usize, rank: usize },

    #[error("unknown generator `{0}`")]
    UnknownGenerator(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = CacError> = std::result::Result<T, E>;
