use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("scenario mismatch between operands")]
    ScenarioMismatch,

    #[error("invalid probability table: {0}")]
    InvalidTable(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("wrong functional form: expected {expected}")]
    FormMismatch { expected: &'static str },

    #[error("strategy count {count} exceeds cap {cap}")]
    CapExceeded { count: u128, cap: u128 },

    #[error("correlation is signaling (max marginal deviation {max_delta:.3e}); use moment::nearest_quantum_correlation first")]
    Signaling { max_delta: f64 },

    #[error("correlation is local; no Bell inequality certificate exists")]
    LocalInput,

    #[error("invalid quantum object: {0}")]
    InvalidQuantum(String),

    #[error("LP solver failure: {0}")]
    LpFailure(String),

    #[error("SDP solver failure: {0}")]
    SdpFailure(String),

    #[error("unsupported moment level: {0}")]
    UnsupportedLevel(String),

    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn parse(line: usize, column: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            column,
            message: message.into(),
        }
    }
}
