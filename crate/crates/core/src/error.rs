use thiserror::Error;

/// Failure modes of the simulation pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Malformed input shape: odd dimension, wrong mode count, bad permutation.
    #[error("structural error: {0}")]
    Structural(String),

    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The linearized dynamics have no steady state.
    #[error("unstable linear model: max Re(eigenvalue) = {max_real_part:e}")]
    Unstable { max_real_part: f64 },

    /// The Bell measurement carries a singular noise-augmented covariance.
    #[error("degenerate measurement: det(Gamma) = {det:e}")]
    DegenerateMeasurement { det: f64 },

    /// Adaptive quadrature exhausted its budget before reaching tolerance.
    #[error("quadrature did not converge: estimated error {achieved:e} > tolerance {requested:e}")]
    Convergence { achieved: f64, requested: f64 },

    /// Round-off pushed an intermediate quantity out of range.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// A covariance matrix produced by the pipeline violates the uncertainty relation.
    #[error("non-physical covariance matrix: {0}")]
    NonPhysical(String),
}

impl Error {
    /// Short machine-readable tag, used in sweep tables.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Structural(_) => "structural",
            Error::Domain(_) => "domain",
            Error::Unstable { .. } => "unstable",
            Error::DegenerateMeasurement { .. } => "degenerate_gamma",
            Error::Convergence { .. } => "quadrature",
            Error::Numerical(_) => "numerical",
            Error::NonPhysical(_) => "non_physical",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
