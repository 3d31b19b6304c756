//! Configuration, suite orchestration and reporting for the `cmap` binary.

pub mod config;
pub mod metric;
pub mod report;
pub mod suites;

use thiserror::Error;

/// Process exit statuses.
pub mod exit {
    pub const SUCCESS: u8 = 0;
    pub const SUITE_FAILURE: u8 = 1;
    pub const INVALID_CONFIG: u8 = 2;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("point rejected: {0}")]
    Domain(String),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Domain(_) => exit::INVALID_CONFIG,
            CliError::Io { .. } => exit::SUITE_FAILURE,
        }
    }
}
