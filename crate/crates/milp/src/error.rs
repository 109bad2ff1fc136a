use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MilpError {
    #[error("variable index {index} out of range (problem has {count} variables)")]
    UnknownVariable { index: usize, count: usize },

    #[error("variable `{0}` has lower bound above upper bound")]
    EmptyDomain(String),

    #[error("invalid solver parameters: {0}")]
    InvalidParams(String),

    #[error("simplex did not converge within {0} iterations")]
    IterationLimit(usize),

    #[error("unsupported model feature: {0}")]
    Unsupported(String),

    #[error("LP format error on line {line}: {message}")]
    Parse { line: usize, message: String },
}
