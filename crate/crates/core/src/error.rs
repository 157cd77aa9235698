use thiserror::Error;

/// Errors produced by the analytic model, the combinatorics layer and the
/// simulator configuration checks.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A network or simulation parameter violates a structural constraint.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// An argument is outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested arrival rate is at or above the throughput capacity,
    /// so the local queue has no finite stationary delay.
    #[error("unstable load: lambda {lambda} >= capacity {capacity}")]
    UnstableLoad { lambda: f64, capacity: f64 },

    /// The fixed-point solver ran out of iterations. Carries the last
    /// residual |P_B - pi(B)| observed.
    #[error("fixed-point solver did not converge: residual {residual}")]
    SolverDiverged { residual: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
