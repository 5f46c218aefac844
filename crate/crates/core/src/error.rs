use thiserror::Error;

/// Errors raised by the library.
///
/// The variants are grouped so that a front end can map them onto distinct
/// exit statuses: bad input, violated theoretical constraints, and failed
/// sampler diagnostics.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("constraint violated: {0}")]
    Constraint(String),

    #[error("diagnostic failure: {0}")]
    Diagnostic(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("rank-deficient design: {0}")]
    RankDeficient(String),

    #[error("quadrature did not converge: {0}")]
    NotConverged(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
