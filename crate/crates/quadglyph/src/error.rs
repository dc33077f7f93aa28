//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by any pipeline stage.
#[derive(Error, Debug)]
pub enum Error {
    /// An operation precondition was violated (bad dimensions, empty input, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A configuration file or value could not be used.
    #[error("config error: {0}")]
    Config(String),

    /// A dataset or intermediate artifact is missing or inconsistent.
    #[error("data error: {0}")]
    Data(String),

    /// A serialized file (IDX, PGM, model, mask, corpus) is malformed.
    #[error("format error: {0}")]
    Format(String),

    /// Training produced a non-finite parameter or loss.
    #[error("training diverged: {0}")]
    TrainingDiverged(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 config, 3 data, 4 divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::InvalidInput(_) | Error::Data(_) | Error::Format(_) | Error::Io(_) => 3,
            Error::TrainingDiverged(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
