use thiserror::Error;

#[derive(Debug, Error)]
pub enum RatingError {
    #[error("invalid rating parameters: {0}")]
    InvalidParams(String),
    #[error("match {match_id} is dated after the reference time")]
    FutureMatch { match_id: String },
    #[error("match {match_id} segment {segment}: {message}")]
    BadSegment {
        match_id: String,
        segment: u32,
        message: String,
    },
    #[error("unknown player `{0}`")]
    UnknownPlayer(String),
    #[error("the corpus contains no usable segments")]
    EmptyCorpus,
    #[error("{path}: line {line}: {message}")]
    Csv {
        path: String,
        line: u64,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
