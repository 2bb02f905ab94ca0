use thiserror::Error;

/// Errors raised by grid construction, collectives, layouts and factorizations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid shape: {0}")]
    GridShape(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("collective error: {0}")]
    Collective(String),

    /// A nonpositive (or non-finite) pivot was met while factoring a matrix
    /// that should have been symmetric positive definite.
    #[error(
        "numerical breakdown: nonpositive Cholesky pivot {value:e} at index {pivot}; \
         CholeskyQR2 needs cond(A) well below 1/sqrt(eps)"
    )]
    Breakdown { pivot: usize, value: f64 },

    #[error("singular triangular factor: zero diagonal at index {0}")]
    Singular(usize),

    #[error("layout consistency violated: {0}")]
    Consistency(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix format error: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
