use thiserror::Error;

/// Errors produced by the reconstruction toolkit.
#[derive(Debug, Error)]
pub enum ReconError {
    /// A spec struct (phantom, mask, schedule, sampler config) violates its invariants.
    #[error("specification error: {0}")]
    Spec(String),

    /// Geometry, grid or model configuration is inconsistent with the data.
    #[error("configuration error: {0}")]
    Config(String),

    /// Array shapes do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Malformed file content (bad magic, truncated payload, unparsable sidecar).
    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ReconError>;

impl ReconError {
    pub fn spec(msg: impl Into<String>) -> Self {
        ReconError::Spec(msg.into())
    }
    pub fn config(msg: impl Into<String>) -> Self {
        ReconError::Config(msg.into())
    }
    pub fn shape(msg: impl Into<String>) -> Self {
        ReconError::Shape(msg.into())
    }
    pub fn format(msg: impl Into<String>) -> Self {
        ReconError::Format(msg.into())
    }
}
