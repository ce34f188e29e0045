use thiserror::Error;

/// Errors raised by the identification pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid dimensions, ranges or configuration values.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// A theory precondition does not hold (e.g. the decay rate is not above the spectral radius).
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// An iterative routine did not converge.
    #[error("numerical failure: {message} (residual {residual:e})")]
    Numerical { message: String, residual: f64 },

    /// The rank-n truncation of the Hankel matrix is too ill-conditioned to factor.
    #[error("degenerate realization: sigma_n = {sigma_n:e} (relative {relative:e})")]
    DegenerateRealization { sigma_n: f64, relative: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// Malformed CSV or matrix file.
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
