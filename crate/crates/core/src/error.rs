use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum KqlError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("step budget of {budget} exhausted")]
    BudgetExhausted { budget: usize },

    #[error("out of domain: {0}")]
    OutOfDomain(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for KqlError {
    fn from(e: std::io::Error) -> Self {
        KqlError::Io(e.to_string())
    }
}

impl From<csv::Error> for KqlError {
    fn from(e: csv::Error) -> Self {
        KqlError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, KqlError>;
