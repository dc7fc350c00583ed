use thiserror::Error;

/// Failure modes shared by all solvers in the crate.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The operation was evaluated on (or numerically at) a pole.
    #[error("singularity: {0}")]
    Singularity(String),

    /// Adaptive quadrature or root polishing failed to reach the requested accuracy.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The requested combination of parameters is not supported by the method.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A density or covariance matrix violates positivity/normalisation.
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// Inconsistent solver configuration (e.g. hierarchy built for a different truncation).
    #[error("configuration error: {0}")]
    Configuration(String),

    /// The adaptive integrator's step size collapsed.
    #[error("step size underflow at t = {t:.6e} (h = {h:.3e}); the problem is too stiff for the explicit scheme, reduce N_C or the largest decay rate")]
    Stiffness { t: f64, h: f64 },

    /// The hierarchy would exceed the size guard.
    #[error("hierarchy with {count} members exceeds the limit of {limit}")]
    SizeOverflow { count: u128, limit: u128 },
}

pub type Result<T> = std::result::Result<T, Error>;
