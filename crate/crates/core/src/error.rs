use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular evaluation: {0}")]
    Singularity(String),

    #[error("divergent integral: {0}")]
    Divergent(String),

    #[error("no convergence: {message} (estimate {estimate:e}, error {error:e})")]
    NoConvergence { message: String, estimate: f64, error: f64 },

    #[error("root not bracketed on [{lo}, {hi}]")]
    Bracketing { lo: f64, hi: f64 },

    #[error("accuracy check failed: {0}")]
    Accuracy(String),

    #[error("eigenpair tracking failed for k = {k}: best overlap {overlap:.4}")]
    Tracking { k: usize, overlap: f64 },

    #[error("Newton iteration failed at a = {a:e}: {message}")]
    Newton {
        a: f64,
        message: String,
        residual_history: Vec<f64>,
    },

    #[error("fit quality: {0}")]
    Fit(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
