use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("address {address} out of range for length {len}")]
    Address { address: usize, len: usize },
    #[error("region {begin}..={end} overlaps an occupied region")]
    Overlap { begin: usize, end: usize },
    #[error("decode error: {0}")]
    Decode(String),
    #[error("ambiguous action point: {0}")]
    Ambiguity(String),
    #[error("class is not encodable: {0}")]
    NotEncodable(String),
    #[error("capacity exceeded: need {needed} bits, have {available}")]
    Capacity { needed: usize, available: usize },
    #[error("patch conflict: {0}")]
    Conflict(String),
    #[error("internal speech slot is occupied by class {0}")]
    Busy(u32),
    #[error("forbidden: {0}")]
    Forbidden(String),
    #[error("scope error: {0}")]
    Scope(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
