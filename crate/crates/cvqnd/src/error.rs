use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not symplectic: max deviation {max_dev:e} exceeds {tol:e}")]
    NotSymplectic { max_dev: f64, tol: f64 },

    #[error("degenerate measurement: quadrature variance {var:e} is below threshold")]
    DegenerateMeasurement { var: f64 },

    #[error("covariance is not positive semidefinite: eigenvalue {eigenvalue:e}")]
    NotPositiveSemidefinite { eigenvalue: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
