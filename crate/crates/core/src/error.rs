use thiserror::Error;

#[derive(Debug, Error)]
pub enum AvmError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid label {label} on line {line}: {msg}")]
    Label {
        line: usize,
        label: String,
        msg: String,
    },

    #[error("index {index} out of range (1..={len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("empty dataset: {0}")]
    EmptyDataset(&'static str),

    #[error("malformed model snapshot: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, AvmError>;

pub(crate) fn invalid(msg: impl Into<String>) -> AvmError {
    AvmError::InvalidParameter(msg.into())
}
