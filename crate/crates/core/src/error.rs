use thiserror::Error;

pub type Result<T> = std::result::Result<T, DcmaError>;

#[derive(Debug, Error)]
pub enum DcmaError {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("simulation error at observation {obs}, draw {draw}, regime {regime}: {reason}")]
    Simulation {
        obs: usize,
        draw: usize,
        regime: String,
        reason: String,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl DcmaError {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        DcmaError::Shape(msg.into())
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        DcmaError::Argument(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        DcmaError::Config(msg.into())
    }
}
