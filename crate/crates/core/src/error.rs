//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    InvalidDimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("mask entry {value} at bin {bin} outside [0, 1]")]
    InvalidMask { bin: usize, value: f64 },

    #[error("filter update rejected at block {block}: non-finite input")]
    UpdateRejected { block: u64 },

    #[error("training diverged: non-finite loss at block {block}")]
    TrainingDiverged { block: usize },

    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 2 config, 3 data, 4 numerical divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_) => 2,
            Error::UpdateRejected { .. } | Error::TrainingDiverged { .. } => 4,
            _ => 3,
        }
    }
}
