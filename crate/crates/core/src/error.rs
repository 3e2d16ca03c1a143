use thiserror::Error;

/// Errors produced anywhere in the power-analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or design value violates its invariant.
    #[error("{reason}")]
    Invalid { field: &'static str, reason: String },

    /// Input data could not be parsed or fails a dataset invariant.
    #[error("{0}")]
    Data(String),

    /// A model fit could not be carried out at all.
    #[error("fit failed: {0}")]
    Fit(String),

    /// The Monte Carlo engine produced unusable results.
    #[error("power engine: {0}")]
    Engine(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
