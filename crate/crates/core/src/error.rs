use thiserror::Error;

/// Errors raised by the lattice operators, the flow integrators and the experiment driver.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum BflError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("non-finite value at node {node}")]
    NonFinite { node: usize },

    #[error("speed coefficient g = {value} at node {node} violates bounds [{alpha}, {beta}]")]
    CoefficientBound {
        node: usize,
        value: f64,
        alpha: f64,
        beta: f64,
    },

    #[error("coordinate {x} outside interpolation domain [{lo}, {hi}]")]
    Domain { x: f64, lo: f64, hi: f64 },

    #[error("numerical divergence at step {step} (t = {t})")]
    Divergence { step: usize, t: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("internal solver error: {0}")]
    Solver(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for BflError {
    fn from(err: std::io::Error) -> Self {
        BflError::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, BflError>;
