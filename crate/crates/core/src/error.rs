use thiserror::Error;

use crate::lp::LpStatus;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("ground set size {0} is not supported (expected 1..={max})", max = crate::capacity::MAX_GROUND_SET)]
    GroundSetSize(usize),

    #[error("maxitivity order k = {k} is invalid for m = {m}")]
    InvalidOrder { k: usize, m: usize },

    #[error("subset mask {mask:#b} is out of range for m = {m}")]
    MaskOutOfRange { mask: u32, m: usize },

    #[error("capacity value {value} on {mask:#b} is outside [0, 1]")]
    ValueOutOfRange { mask: u32, value: f64 },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("linear program finished with status {status:?}: {context}")]
    Lp { status: LpStatus, context: String },

    #[error("LP solver exceeded {0} iterations")]
    IterationLimit(usize),

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

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }
}
