use thiserror::Error;

/// Errors raised by the library.
///
/// The CLI maps [`Error::ContractViolation`] to exit code 2 and everything
/// else to exit code 1.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("infeasible constraints: {0}")]
    Infeasible(String),

    #[error("unsupported structure family: {0}")]
    UnsupportedFamily(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn is_contract_violation(&self) -> bool {
        matches!(self, Error::ContractViolation(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
