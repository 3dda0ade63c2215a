use std::path::PathBuf;

use cac_core::CacError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("label budget exhausted after {queries} queries; partial results in {}", output.display())]
    Budget { queries: usize, output: PathBuf },

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("cannot write {}: {source}", path.display())]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] CacError),
}

impl CliError {
    /// Process exit status: 2 config, 3 data, 4 budget, 5 protocol, 1 other.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Budget { .. } => 4,
            CliError::Protocol(_) => 5,
            CliError::Output { .. } => 1,
            CliError::Core(e) => match e {
                CacError::InvalidParameter(_) | CacError::UnknownGenerator(_) => 2,
                CacError::Parse { .. }
                | CacError::InvalidInput(_)
                | CacError::NonFinite(_)
                | CacError::DimensionMismatch { .. }
                | CacError::RankDeficient { .. }
                | CacError::Io(_) => 3,
                CacError::BudgetExhausted { .. } | CacError::OracleUnavailable { .. } => 4,
                CacError::OracleDisconnected => 5,
                _ => 1,
            },
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
