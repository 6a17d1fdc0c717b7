use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A correlation triple does not form a positive semidefinite matrix.
    #[error("correlation matrix is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },

    /// An iterative method stopped before reaching its tolerance.
    #[error("no convergence after maximum refinement (achieved error estimate {error_estimate:e})")]
    NoConvergence { error_estimate: f64 },

    /// A root bracket never changed sign, even after expansion.
    #[error("no sign change on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    /// The planning alternative is not inside H1, so no finite sample size reaches the target.
    #[error("infinite sample size: the alternative does not lie in H1 ({0})")]
    InfiniteSampleSize(String),

    /// Trial data are unusable for the requested estimator.
    #[error("invalid trial data: {0}")]
    InvalidData(String),

    /// The inflation factor cannot be defined because the pilot already reaches the fixed design size.
    #[error("inflation factor undefined: pilot size {n1} is not below the fixed-design size {n_fixed}")]
    FactorUndefined { n1: u64, n_fixed: u64 },

    /// Output could not be written.
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::InvalidData(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
