use thiserror::Error;

/// Failures of the exact permanent kernels and matrix constructors.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatrixError {
    #[error("dimension {dim} exceeds the supported maximum {max}")]
    DimensionTooLarge { dim: usize, max: usize },
    #[error("dimension {dim} is below the required minimum {min}")]
    DimensionTooSmall { dim: usize, min: usize },
    #[error("expected {expected} entries for a square matrix, got {actual}")]
    NotSquare { expected: usize, actual: usize },
    #[error("matrix contains a non-finite entry")]
    NonFinite,
}

/// Errors raised while talking to an oracle, local or remote.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("invalid oracle spec: {0}")]
    InvalidSpec(String),
    #[error("remote oracle unavailable: {0}")]
    RemoteUnavailable(String),
    #[error("protocol error: {0}")]
    Protocol(#[from] ProtocolError),
    #[error("timed out after {0:?} waiting for the oracle")]
    Timeout(std::time::Duration),
    #[error("dimension {k} is outside the oracle range 1..={max_dim}")]
    DimensionOutOfRange { k: usize, max_dim: usize },
    #[error("query declared k = {declared} but the matrix is {actual}x{actual}")]
    DimensionMismatch { declared: usize, actual: usize },
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// Wire-level failures of the line-delimited JSON oracle protocol.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("malformed frame: {0}")]
    Malformed(String),
    #[error("response id {got} does not match request id {expected}")]
    IdMismatch { expected: u64, got: u64 },
    #[error("oracle returned a non-finite value")]
    NonFinite,
    #[error("oracle reported an error for request {id}: {message}")]
    Remote { id: u64, message: String },
    #[error("unexpected frame type {0:?}")]
    UnexpectedFrame(String),
    #[error("stream closed")]
    Closed,
    #[error("i/o failure: {0}")]
    Io(String),
}

impl From<std::io::Error> for ProtocolError {
    fn from(err: std::io::Error) -> Self {
        ProtocolError::Io(err.to_string())
    }
}

/// Parameter validation errors for the tester and the diagnostics.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}
