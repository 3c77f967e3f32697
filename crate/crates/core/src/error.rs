use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("episode finished")]
    EpisodeFinished,

    #[error("subtask index {index} out of range 1..={count}")]
    SubtaskOutOfRange { index: usize, count: usize },

    #[error("subgoal outside the subgoal space of subtask {0}")]
    InvalidSubgoal(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("demonstration collection failed: {0}")]
    Demonstration(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error("training failed: {0}")]
    Training(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            got,
        })
    }
}
