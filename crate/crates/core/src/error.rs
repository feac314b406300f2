use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A Hilbert space or workload exceeds a configured cap.
    #[error("resource cap exceeded: {what} needs {requested}, cap is {cap}")]
    Resource {
        what: String,
        requested: u128,
        cap: u128,
    },

    /// Path enumeration ran out of node budget. `partial_paths` counts what
    /// had been collected before giving up.
    #[error("path budget of {budget} expansions exhausted ({partial_paths} partial paths collected)")]
    PathBudget { budget: u64, partial_paths: usize },

    /// The path-sum series could not be truncated within tolerance before the
    /// budget ran out. `partial_sum` is the value accumulated so far.
    #[error("path sum did not converge: partial sum {partial_sum:e}, tail bound {tail:e} > tol {tol:e}")]
    SeriesBudget {
        partial_sum: f64,
        tail: f64,
        tol: f64,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for errors caused by a size or budget cap rather than bad input.
    pub fn is_resource(&self) -> bool {
        matches!(
            self,
            Error::Resource { .. } | Error::PathBudget { .. } | Error::SeriesBudget { .. }
        )
    }
}
