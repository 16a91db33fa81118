use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter or input violates a documented precondition. `field`
    /// names the offending quantity.
    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },

    #[error("matrix is not Hermitian: |A[{row}][{col}] - conj(A[{col}][{row}])| = {deviation:e}")]
    NotHermitian { row: usize, col: usize, deviation: f64 },

    #[error("matrix is singular (zero pivot in column {column})")]
    Singular { column: usize },

    #[error("matrix is ill-conditioned (condition estimate {estimate:e})")]
    IllConditioned { estimate: f64 },

    #[error("dimension {dim} exceeds the supported maximum {max}")]
    TooLarge { dim: usize, max: usize },

    #[error("no avoided crossing: branch separation is monotone over the sweep")]
    NoCrossing,

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad input rather than a numerical breakdown.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Validation { .. } | Error::NotHermitian { .. } | Error::TooLarge { .. }
        )
    }
}
