//! Library surface of the batch CLI, split out so integration tests can
//! run commands in-process against temporary directories.

// Validation guards use the negated form on purpose: `!(x > 0.0)` rejects
// NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod ingest;
pub mod report;

use std::fmt;

/// CLI-level failures; library errors are wrapped with their display text.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Invalid(String),
    Io(String),
    Parse(String),
    Library(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Invalid(msg) => write!(f, "invalid invocation: {msg}"),
            CliError::Io(msg) => write!(f, "io error: {msg}"),
            CliError::Parse(msg) => write!(f, "parse error: {msg}"),
            CliError::Library(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Invalid(_) => "invalid",
            CliError::Io(_) => "io",
            CliError::Parse(_) => "parse",
            CliError::Library(_) => "library",
        }
    }
}

impl From<robustmsd::Error> for CliError {
    fn from(e: robustmsd::Error) -> Self {
        CliError::Library(e.to_string())
    }
}

/// Runs a full invocation and returns the process exit code; errors are
/// printed to stderr as one-line JSON records.
pub fn run(args: &[String]) -> i32 {
    match config::parse_args(args).and_then(|inv| commands::execute(&inv)) {
        Ok(code) => code,
        Err(err) => {
            eprintln!(
                "{}",
                serde_json::json!({ "error": err.kind(), "message": err.to_string() })
            );
            1
        }
    }
}
