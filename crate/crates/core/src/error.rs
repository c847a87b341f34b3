use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("time step not converged: halving dt changed the final occupation by {residual:.3e}")]
    Convergence { residual: f64 },

    #[error("invalid configuration at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("spectrum input is empty")]
    EmptySpectrum,

    #[error("insufficient statistics: {0}")]
    Statistics(String),

    #[error("visibility undefined: orthogonal central-peak area is zero")]
    UndefinedVisibility,

    #[error("fit did not converge (best reduced chi2 {best_chi2:.4e})")]
    Fit { best_chi2: f64 },

    #[error("ingestion failed at byte {offset}: {message}")]
    Ingest { offset: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { path: path.into(), message: message.into() }
    }

    pub(crate) fn domain(message: impl Into<String>) -> Self {
        Error::Domain(message.into())
    }
}
