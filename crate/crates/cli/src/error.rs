//! CLI-level error classification.
//!
//! Exit codes: 0 success, 2 input error, 3 selection error, 4 capacity
//! error, 5 output conflict, 1 anything else.

use tracemark_core::Error as CoreError;

#[derive(thiserror::Error, Debug)]
pub enum CliError {
    #[error("input error: {0}")]
    Input(String),
    #[error("selection error: {0}")]
    Selection(String),
    #[error("capacity error: {0}")]
    Capacity(String),
    #[error("output conflict: {0}")]
    OutputConflict(String),
    #[error(transparent)]
    Internal(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Selection(_) => 3,
            CliError::Capacity(_) => 4,
            CliError::OutputConflict(_) => 5,
            CliError::Internal(_) => 1,
        }
    }

    pub fn input(msg: impl std::fmt::Display) -> Self {
        CliError::Input(msg.to_string())
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match &e {
            CoreError::EmptyManifest
            | CoreError::MTooLarge { .. }
            | CoreError::BadDegradeParam { .. }
            | CoreError::InvalidBounds { .. }
            | CoreError::EmptyTokenSet => CliError::Input(e.to_string()),
            CoreError::InsufficientCandidates { .. } => CliError::Selection(e.to_string()),
            CoreError::PoolTooSmall { .. } | CoreError::ExhaustedAttempts { .. } => {
                CliError::Capacity(e.to_string())
            }
            CoreError::DuplicateUser { .. } => CliError::OutputConflict(e.to_string()),
            _ => CliError::Internal(anyhow::anyhow!(e.to_string())),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
