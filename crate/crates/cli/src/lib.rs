//! Driver layer for the `qinsch` solver: configuration, initial data,
//! diagnostics, checkpoints and the command implementations.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod diagnostics;
pub mod init;
pub mod manufactured;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(#[from] config::ConfigError),
    #[error("solver: {0}")]
    Solver(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) | CliError::Io { .. } => 1,
            CliError::Solver(_) => 2,
            CliError::Verification(_) => 3,
        }
    }
}
