use thiserror::Error;

/// Errors shared across the crate.
///
/// The variants map onto the CLI exit codes: invalid input (1), infeasible
/// exact computation (2), numerical failure (3).
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed shapes, files, parameters, or arguments.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The exact evidence enumeration would exceed the allocation budget.
    #[error(
        "exact evidence infeasible: ~{estimated:.3e} allocations exceed the budget of \
         {budget:.3e}; rerun with method=mc"
    )]
    Infeasible { estimated: f64, budget: f64 },

    /// A computation produced a result outside its numeric contract.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
