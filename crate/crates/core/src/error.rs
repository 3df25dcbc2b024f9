use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter set that cannot describe a valid cell, channel or campaign.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A simulation invariant (grant audit, causality, additivity) was broken.
    #[error("simulation invariant violated: {0}")]
    Invariant(String),

    /// Input data that does not satisfy an operation's preconditions.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no data: {0}")]
    Empty(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
