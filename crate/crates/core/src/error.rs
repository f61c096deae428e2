use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed arguments: unknown symbols, dimension mismatches, bad parameters.
    #[error("invalid input: {0}")]
    Input(String),
    /// A search or enumeration exceeded its configured node budget.
    #[error("resource budget exceeded: {what} needs more than {budget} nodes")]
    Resource { what: String, budget: usize },
    /// An iterative solve did not reach its tolerance.
    #[error("numeric failure: {context} (residual {residual:e})")]
    Numeric { context: String, residual: f64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("solver failure: {0}")]
    Solver(String),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
}
