//! Error type shared by all modules of the crate.

use thiserror::Error;

/// Errors produced by tensor algebra, proximal operators and the solver.
#[derive(Debug, Error)]
pub enum LtdError {
    /// Operand shapes do not conform.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Input violates a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A numerical routine failed to converge or produced non-finite values.
    #[error("numeric failure: {0}")]
    NumericFailure(String),

    /// A mode-3 tube that must be normalized has zero norm.
    #[error("degenerate tube at ({i}, {j}): zero norm")]
    DegenerateTube { i: usize, j: usize },
}

pub type Result<T> = std::result::Result<T, LtdError>;
