use thiserror::Error;

use singular_bound::Error as CoreError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    /// 2 for bad arguments, 3 for violated constraints, 4 for failed
    /// diagnostics.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io(_) | CliError::Json(_) => 2,
            CliError::Core(e) => match e {
                CoreError::Constraint(_) | CoreError::Singular(_) => 3,
                CoreError::Diagnostic(_) | CoreError::NotConverged(_) | CoreError::NonFinite(_) => 4,
                _ => 2,
            },
        }
    }
}
