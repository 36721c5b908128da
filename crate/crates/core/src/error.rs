use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("invalid scenario: {0}")]
    Semantic(String),

    #[error("oversaturated intersection: flow ratio sum {0:.4} >= 1")]
    Oversaturated(f64),

    #[error("rank-deficient regression: {0}")]
    RankDeficient(String),

    #[error("nonphysical parameters: {0}")]
    Nonphysical(String),

    #[error("corrupt or incompatible table document: {0}")]
    Persistence(String),

    #[error("missing strategy artifact: {0}")]
    MissingArtifact(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
