use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller passed arguments with inconsistent shapes or out-of-range values.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("non-finite value: {0}")]
    NumericDomain(String),

    /// A trajectory left the representable range; `index` is the last
    /// grid index holding a valid state.
    #[error("trajectory diverged after index {index}")]
    Diverged { index: usize },

    #[error("unknown benchmark model `{0}`")]
    UnknownModel(String),

    #[error("minimizer failed: {0}")]
    Minimizer(String),

    #[error("numerical conditioning: {0}")]
    Conditioning(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NumericDomain(_) | Error::Diverged { .. } | Error::Minimizer(_) | Error::Conditioning(_)
        )
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}
