use thiserror::Error;

/// Errors produced by the lattice, model, oracle and experiment layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unsupported dimension {0} (supported: 1..=3)")]
    UnsupportedDimension(usize),

    #[error("site {0} lies outside the domain")]
    OutOfDomain(String),

    #[error("domain too small: {0}")]
    DomainTooSmall(String),

    #[error("symbol {symbol} out of range for alphabet of size {alphabet}")]
    SymbolOutOfRange { symbol: usize, alphabet: usize },

    #[error("missing context symbol at {0}")]
    MissingContext(String),

    #[error("enumeration budget exceeded: {needed} > {budget}")]
    BudgetExceeded { needed: f64, budget: f64 },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("Dobrushin condition violated (row sum {0:.6}); glauber sampling refused")]
    DobrushinViolated(f64),

    #[error("uninformative survival estimate: {0}")]
    Uninformative(String),

    #[error("censoring fraction {fraction:.4} exceeds limit {limit:.4}")]
    Censoring { fraction: f64, limit: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
