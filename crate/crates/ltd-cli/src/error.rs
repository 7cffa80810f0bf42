//! CLI error type with one process exit code per error class.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Configuration file problems: syntax, unknown keys, invalid values.
    #[error("config error: {0}")]
    Config(String),

    /// Operating-system level I/O failures.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A cube file does not start with the expected magic bytes.
    #[error("format error: {0}")]
    BadMagic(String),

    /// A cube file payload is shorter or longer than its header promises.
    #[error("format error: {0}")]
    Truncated(String),

    /// A cube file carries NaN or infinite samples.
    #[error("format error: {0}")]
    NonFinite(String),

    /// Malformed PGM or CSV content.
    #[error("format error: {0}")]
    Malformed(String),

    /// Inputs that parse but violate a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Numerical failure inside the solver or metrics.
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl CliError {
    /// Stable process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::BadMagic(_) => 4,
            CliError::Truncated(_) => 5,
            CliError::NonFinite(_) => 6,
            CliError::Malformed(_) => 7,
            CliError::InvalidInput(_) => 8,
            CliError::Numeric(_) => 9,
        }
    }
}

impl From<ltd_core::LtdError> for CliError {
    fn from(e: ltd_core::LtdError) -> Self {
        use ltd_core::LtdError::*;
        match e {
            NumericFailure(m) => CliError::Numeric(m),
            DimensionMismatch(m) => CliError::InvalidInput(m),
            InvalidInput(m) => CliError::InvalidInput(m),
            DegenerateTube { i, j } => {
                CliError::Numeric(format!("degenerate tube at ({i}, {j})"))
            }
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
