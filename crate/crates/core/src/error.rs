use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum WaveError {
    /// Grid or field dimensions that cannot work together.
    #[error("structural error: {0}")]
    Structural(String),

    /// Invalid or inconsistent configuration, including budget violations.
    #[error("configuration error: {0}")]
    Config(String),

    /// A query outside the domain covered by stored data.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative solver did not reach its tolerance.
    #[error("solver did not converge: {message} (last residuals: {history:?})")]
    NoConvergence { message: String, history: Vec<f64> },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, WaveError>;

impl WaveError {
    pub fn structural(msg: impl Into<String>) -> Self {
        WaveError::Structural(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        WaveError::Config(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        WaveError::Domain(msg.into())
    }
}
