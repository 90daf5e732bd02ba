use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid decision space: {0}")]
    InvalidSpace(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("coordinate {index} out of bounds: {value}")]
    OutOfBounds { index: usize, value: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("constraint value at the center is not strictly negative ({0})")]
    InfeasibleAtCenter(f64),
    #[error("back-off condition not reached after {0} halvings")]
    NotReached(u32),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("measurement refers to unknown suggestion `{0}`")]
    UnknownSuggestion(String),
    #[error("suggestion `{0}` was already measured")]
    DuplicateMeasurement(String),
    #[error("session is finished")]
    SessionFinished,
    #[error("cycle is not ready: {0} measurement(s) still pending")]
    NotReady(usize),
    #[error("no cycle has been completed yet")]
    NoCycleCompleted,

    #[error("unknown plant `{0}`")]
    UnknownPlant(String),
    #[error("grid of {0} points exceeds the 10^7 limit")]
    GridTooLarge(u128),

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
