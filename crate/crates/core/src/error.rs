use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid scenario: {0}")]
    Validation(String),

    #[error("scenario parse error: {0}")]
    Parse(String),

    /// Newton iteration failed to converge or the solution blew up.
    #[error("simulation diverged at t = {time:.6} s (residual norm {residual:.3e})")]
    Divergence { time: f64, residual: f64 },

    #[error("incompatible series: {0}")]
    Incompatible(String),

    #[error("singular linear system at t = {time:.6} s")]
    Singular { time: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, SimError>;
