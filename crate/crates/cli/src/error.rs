use thiserror::Error;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CAPACITY: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("capacity: {0}")]
    Capacity(String),
    #[error("i/o: {0}")]
    Io(String),
    /// A validation check or a numerical routine failed.
    #[error("failed: {0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Capacity(_) => EXIT_CAPACITY,
            CliError::Io(_) => EXIT_IO,
            CliError::Failed(_) => EXIT_VALIDATION,
        }
    }

    pub(crate) fn io(context: impl std::fmt::Display, e: std::io::Error) -> Self {
        CliError::Io(format!("{context}: {e}"))
    }
}

impl From<ewsn::Error> for CliError {
    fn from(e: ewsn::Error) -> Self {
        match e {
            ewsn::Error::Capacity { .. } => CliError::Capacity(e.to_string()),
            ewsn::Error::Numeric(_) => CliError::Failed(e.to_string()),
            ewsn::Error::Dimension(_) | ewsn::Error::Validation(_) => CliError::Usage(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
