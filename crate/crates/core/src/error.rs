use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid decoding order: {0}")]
    DecodingOrder(String),

    #[error("negative transmit power {value} on uplink stream {stream}")]
    NegativePower { stream: usize, value: f64 },

    #[error("non-finite value at tape node {node} (op {op})")]
    NonFinite { node: usize, op: &'static str },

    #[error("non-finite {what} during {context}")]
    Diverged { what: &'static str, context: String },

    #[error("spec error at line {line}: {msg}")]
    Spec { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by malformed user input rather than the environment.
    pub fn is_spec_error(&self) -> bool {
        !matches!(self, Error::Io(_) | Error::Csv(_) | Error::Json(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
