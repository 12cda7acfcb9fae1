use ebcc_core::EbccError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Codec(#[from] EbccError),

    #[error("invalid argument: {0}")]
    Argument(String),

    /// A particle position became non-finite during integration.
    #[error("particle {particle} left the finite domain at step {step}")]
    Simulation { step: usize, particle: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl BenchError {
    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        BenchError::Argument(msg.into())
    }
}

pub type Result<T, E = BenchError> = std::result::Result<T, E>;
