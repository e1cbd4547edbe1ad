use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("fill on a side quoted at infinite offset ({side})")]
    FillOnWithdrawnSide { side: &'static str },

    #[error("episode already terminal at step {0}")]
    TerminalState(usize),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("backward pass requires a cached forward pass over the same network")]
    MissingForwardCache,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("dimension mismatch for {kind}: expected {expected} outputs, got {actual}")]
    DimensionMismatch {
        kind: String,
        expected: usize,
        actual: usize,
    },

    #[error("invalid action index {index} for a {n_actions}-action agent")]
    InvalidAction { index: usize, n_actions: usize },

    #[error("missing policy: {0}")]
    MissingPolicy(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("checkpoint kind mismatch: expected {expected}, found {found}")]
    KindMismatch { expected: String, found: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
