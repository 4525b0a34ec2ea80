use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Core(#[from] blockdialect::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed file: {0}")]
    Format(String),

    #[error("{0}")]
    Usage(String),

    /// A self-check failed on otherwise valid input.
    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl CliError {
    /// 2 for input errors, 3 for invariant failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invariant(_) => 3,
            _ => 2,
        }
    }
}
