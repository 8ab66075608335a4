use std::path::PathBuf;

/// Errors produced anywhere in the lab.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("token id {id} is outside the vocabulary (size {vocab_size})")]
    InvalidToken { id: usize, vocab_size: usize },

    #[error("unknown token surface form `{0}`")]
    UnknownToken(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid scene program: {0}")]
    InvalidScene(String),

    #[error("invalid rollout group: {0}")]
    InvalidGroup(String),

    #[error("rollout group is empty")]
    EmptyGroup,

    #[error("batch of mask decisions is empty")]
    EmptyBatch,

    #[error("advantage estimation needs at least 2 rewards, got {0}")]
    GroupTooSmall(usize),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("numerical error: {0}")]
    NumericalError(String),

    #[error("constraint mask allows no token")]
    EmptyMask,

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the error stems from user input (config, files) rather than a
    /// failure during a run. The CLI maps this to its exit code.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig(_) | Error::InvalidScene(_) | Error::UnknownToken(_) | Error::InvalidToken { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
