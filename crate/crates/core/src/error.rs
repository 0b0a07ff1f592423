use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("partition does not match graph: {0}")]
    PartitionMismatch(String),

    #[error("invalid edit: {0}")]
    InvalidEdit(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("degree CV {target} is unreachable; feasible range is {range}")]
    InfeasibleCv { target: f64, range: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
