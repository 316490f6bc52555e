use thiserror::Error;

/// Errors raised by constructions and checks in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("distance ({i},{j}) is {value}: distances must be finite and nonnegative")]
    BadDistance { i: usize, j: usize, value: f64 },
    #[error("distinct points {i} and {j} are at zero distance")]
    ZeroDistance { i: usize, j: usize },
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("empty set")]
    EmptySet,
    #[error("invariant `{name}` violated: {detail}")]
    Invariant { name: String, detail: String },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("json: {0}")]
    Json(String),
}

impl Error {
    pub(crate) fn invariant(name: &str, detail: impl Into<String>) -> Self {
        Error::Invariant { name: name.to_string(), detail: detail.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
