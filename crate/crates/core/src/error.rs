use thiserror::Error;

/// Errors produced by the completion library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter or shape combination that can never be valid.
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    /// The input carries no usable information (zero matrix, zero vector, ...).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// The restricted Gram matrix of a partially observed column is singular.
    #[error("{}", singular_message(*column, *min_eigenvalue))]
    SingularSystem {
        column: Option<usize>,
        min_eigenvalue: f64,
    },
}

fn singular_message(column: Option<usize>, min_eigenvalue: f64) -> String {
    match column {
        Some(c) => format!(
            "singular least-squares system for column {c} (min eigenvalue {min_eigenvalue:.3e}); \
             retry with regularization > 0"
        ),
        None => format!(
            "singular least-squares system (min eigenvalue {min_eigenvalue:.3e}); \
             retry with regularization > 0"
        ),
    }
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::DegenerateInput(msg.into())
    }

    /// True for failures caused by numerics rather than by bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::SingularSystem { .. } | Error::DegenerateInput(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
