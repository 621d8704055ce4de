use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A distribution or model parameter is outside its domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A probability / quantile argument lies outside (0, 1).
    #[error("domain error: {0}")]
    Domain(String),

    /// Lag or lead polynomial has a root on or inside the unit circle.
    #[error("stationarity violated: {0}")]
    Stationarity(String),

    /// Design matrix is rank deficient; `columns` lists the dependent columns.
    #[error("rank-deficient design, dependent columns {columns:?}")]
    Degenerate { columns: Vec<usize> },

    /// Too few usable rows after masking or lag construction.
    #[error("insufficient data: {n_effective} effective rows, need more than {needed}")]
    InsufficientData { n_effective: usize, needed: usize },

    /// Optimizer exhausted its budget without converging.
    #[error("optimizer did not converge within budget ({0})")]
    Convergence(String),

    /// A first moment was required but does not exist for the distribution.
    #[error("undefined moment: {0}")]
    UndefinedMoment(String),

    /// Simplex solver exceeded its iteration safety cap.
    #[error("quantile solver failed: {0}")]
    Solver(String),

    /// Monte Carlo run aborted because too many replicates failed.
    #[error("monte carlo failure budget exceeded: {failed} of {total} replicates failed")]
    FailureBudget { failed: usize, total: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
