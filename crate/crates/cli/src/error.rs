use std::path::PathBuf;

use swan_core::SwanError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] SwanError),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("vocabulary mismatch: {0}")]
    VocabMismatch(String),

    #[error("example {index} is infeasible: {target_len} output tokens from {input_len} inputs with L = {max_seg_len}")]
    InfeasibleExample {
        index: usize,
        target_len: usize,
        input_len: usize,
        max_seg_len: usize,
    },

    #[error("non-finite loss in epoch {epoch}; last good parameters written to {}", last_good.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "<none>".into()))]
    NonFiniteLoss {
        epoch: usize,
        last_good: Option<PathBuf>,
    },

    #[error("{0} self-test check(s) failed")]
    SelftestFailed(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Process exit code: 1 for property or runtime failures, 2 for bad input.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Config(_) | CliError::VocabMismatch(_) => 2,
            CliError::Core(SwanError::InvalidConfig(_)) => 2,
            _ => 1,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
