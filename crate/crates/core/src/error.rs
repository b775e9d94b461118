use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("numeric failure: {0}")]
    NumericFailure(String),
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("parse error: {0}")]
    ParseError(String),
    #[error("validation error: {0}")]
    ValidationError(String),
    #[error("generator `{0}` has no inverse in the pairing")]
    NoInverse(String),
    #[error("input too large: {0}")]
    TooLarge(String),
    #[error("empty input: {0}")]
    EmptyInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
