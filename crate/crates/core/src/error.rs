use thiserror::Error;

use crate::codec::TrainTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("code index {index} out of range for a codebook of {codes} entries")]
    IndexOutOfRange { index: u64, codes: u64 },

    #[error("training diverged at step {step}: {reason}")]
    Diverged {
        step: usize,
        reason: String,
        trace: Box<TrainTrace>,
    },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    /// True for failures caused by numerics rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Diverged { .. } | Error::NonFinite(_) | Error::Infeasible(_)
        )
    }
}
