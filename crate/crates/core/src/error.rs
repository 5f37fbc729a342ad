use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("brute force refused for n = {0} (limit 9)")]
    TooLarge(usize),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("rank-deficient regression: {0}")]
    RankDeficient(String),

    #[error("missing model for level {0}")]
    MissingLevel(usize),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
