use thiserror::Error;

/// Errors produced by the compressor, its codecs and the container format.
#[derive(Debug, Error)]
pub enum EbccError {
    /// A non-finite value was found while ingesting raw data.
    #[error("non-finite value {value} at flat index {index}")]
    Ingest { index: usize, value: f32 },

    #[error("invalid argument: {0}")]
    Argument(String),

    /// Malformed or truncated encoded data. `offset` is a byte offset into the
    /// buffer being parsed.
    #[error("format error at byte {offset}: {reason}")]
    Format { offset: usize, reason: String },

    #[error("unsupported container version {found} (expected {expected})")]
    UnsupportedVersion { found: u16, expected: u16 },

    /// Even the complete residual stream cannot bring every point within the
    /// error bound.
    #[error("residual layer cannot reach the error bound")]
    ResidualInsufficient,

    /// An error raised while processing one chunk of a grid.
    #[error("chunk at origin {origin:?}: {source}")]
    Chunk {
        origin: [usize; 4],
        #[source]
        source: Box<EbccError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl EbccError {
    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        EbccError::Argument(msg.into())
    }

    pub(crate) fn format(offset: usize, reason: impl Into<String>) -> Self {
        EbccError::Format {
            offset,
            reason: reason.into(),
        }
    }

    /// Strips any chunk-origin wrapping and returns the underlying error.
    pub fn root(&self) -> &EbccError {
        match self {
            EbccError::Chunk { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T, E = EbccError> = std::result::Result<T, E>;
