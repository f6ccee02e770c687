use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("node index {index} out of range for graph with {n} nodes")]
    NodeOutOfRange { index: usize, n: usize },

    #[error("self-loop on node {0} is not allowed")]
    SelfLoop(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("rate {rate} exceeds 1 under the Bernoulli edge law")]
    RateAboveOne { rate: f64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("estimated community {0} is empty")]
    EmptyCommunity(usize),

    #[error("eigensolver did not converge: {0}")]
    NoConvergence(String),

    #[error("flagged set has {size} nodes (limit {limit}); use a smaller alpha")]
    FlaggedSetTooLarge { size: usize, limit: usize },

    #[error("graph has {graph} nodes but the fitted model has {model}")]
    SizeMismatch { graph: usize, model: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
