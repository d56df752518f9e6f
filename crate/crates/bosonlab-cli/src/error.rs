use std::path::PathBuf;
use thiserror::Error;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_HYPOTHESIS: i32 = 2;
pub const EXIT_USAGE: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("run directory {0} is locked by another process (remove the lock file if stale)")]
    Locked(PathBuf),
    #[error("memory guard: {what} needs an estimated {needed} bytes, budget is {budget} bytes")]
    Memory { what: String, needed: u64, budget: u64 },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Lib(#[from] bosonlab::error::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use bosonlab::error::Error as E;
        match self {
            CliError::Lib(E::Hypothesis(_) | E::Degenerate) => EXIT_HYPOTHESIS,
            CliError::Lib(E::NotConverged { .. }) => EXIT_VIOLATION,
            _ => EXIT_USAGE,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(std::io::Error::other(e))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(std::io::Error::other(e))
    }
}
