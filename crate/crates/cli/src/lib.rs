//! Command-line front end: configuration, subcommands and report emission.
//!
//! Exit-code contract: 0 success, 1 configuration or data error,
//! 2 verification failure.

pub mod args;
pub mod commands;
pub mod config;
pub mod report;

use std::fmt;

/// Errors surfaced to the terminal, tagged with their exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable config, missing paths, module failures.
    Config(String),
    /// A verification (gradient-check) failure, naming the first bad op.
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 1,
            Self::Verification(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(msg) | Self::Verification(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for CliError {}

pub type Result<T> = std::result::Result<T, CliError>;

/// Shorthand for converting module errors into exit-code-1 diagnostics.
pub fn config_err(e: impl fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}
