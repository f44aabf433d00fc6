use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("covariance table is not positive semidefinite: {0}")]
    NotPsd(String),

    #[error("dependence regime violated: {0}")]
    RegimeViolated(String),

    #[error("discrete convexity violated at lag {lag}: second difference {second_difference:e}")]
    ConvexityViolated { lag: usize, second_difference: f64 },

    #[error("circulant embedding and Toeplitz factorization both failed: {0}")]
    EmbeddingFailed(String),

    #[error("truncation horizon exceeds cap {cap}")]
    HorizonOverflow { cap: usize },

    #[error("normalization radicand is nonpositive ({radicand:e}); beta is too large")]
    RadicandNonpositive { radicand: f64 },

    #[error("adaptive quadrature did not converge: estimate {estimate:e}, error {error:e}")]
    QuadratureNotConverged { estimate: f64, error: f64 },

    #[error("a factor of the exceedance product is zero at threshold {threshold}")]
    ProbabilityOne { threshold: f64 },

    #[error("threshold u_{index} is zero but r > 1")]
    ZeroThreshold { index: usize },

    #[error("exact comparison only supports n = 2, got n = {0}")]
    UnsupportedSize(usize),

    #[error("empirical law has no pairs")]
    EmptySample,

    #[error("configuration: {0}")]
    Config(String),

    #[error("beta cell {beta}: {source}")]
    Cell { beta: f64, source: Box<Error> },

    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    /// `true` for errors caused by invalid user input rather than numerics.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::InvalidParameter(_) | Error::Config(_) => true,
            Error::Cell { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
