use axum::http::StatusCode;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    BadRequest(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<ServiceError>,
    },
    #[error(transparent)]
    Core(#[from] choreo_core::Error),
    #[error(transparent)]
    Neural(#[from] choreo_neural::NeuralError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("toml: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, ServiceError>;

impl ServiceError {
    pub fn context(self, context: impl Into<String>) -> Self {
        ServiceError::Context { context: context.into(), source: Box::new(self) }
    }

    /// HTTP status for API responses: caller mistakes map to 4xx.
    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::BadRequest(_) | ServiceError::Json(_) => StatusCode::BAD_REQUEST,
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::Core(
                choreo_core::Error::InvalidArgument(_)
                | choreo_core::Error::MotifOutOfRange { .. }
                | choreo_core::Error::Schema(_)
                | choreo_core::Error::TooFew(_),
            ) => StatusCode::BAD_REQUEST,
            ServiceError::Context { source, .. } => source.status(),
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

pub trait ResultExt<T> {
    fn context(self, context: impl FnOnce() -> String) -> Result<T>;
}

impl<T, E: Into<ServiceError>> ResultExt<T> for std::result::Result<T, E> {
    fn context(self, context: impl FnOnce() -> String) -> Result<T> {
        self.map_err(|e| e.into().context(context()))
    }
}
