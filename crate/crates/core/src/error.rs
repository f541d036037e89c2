use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unknown specialty label `{0}`")]
    UnknownLabel(String),

    #[error("routing unavailable: {0}")]
    RoutingUnavailable(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("metric unavailable: {0}")]
    MetricUnavailable(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
