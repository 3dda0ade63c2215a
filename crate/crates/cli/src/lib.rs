//! Command-line pipeline and label server for cautious active clustering.

pub mod commands;
pub mod config;
pub mod error;
pub mod serve;

pub use commands::{cmd_baseline, cmd_cluster, cmd_kernel, GridSpec};
pub use config::{DatasetSpec, OracleMode, RunConfig};
pub use error::{CliError, Result};
pub use serve::cmd_serve;
