use std::path::PathBuf;

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::json;

pub type Result<T, E = ServiceError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("no session with id {0}")]
    NotFound(String),
    #[error("invalid session config: {0}")]
    BadConfig(String),
    #[error("malformed request body: {0}")]
    BadBody(String),
    #[error(transparent)]
    Engine(#[from] safe_evop::Error),
    #[error("stored session {0} is unreadable: {1}")]
    Corrupt(PathBuf, String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        use safe_evop::Error as E;
        match self {
            Self::NotFound(_) => StatusCode::NOT_FOUND,
            Self::BadConfig(_) => StatusCode::BAD_REQUEST,
            Self::BadBody(_) => StatusCode::UNPROCESSABLE_ENTITY,
            Self::Engine(e) => match e {
                E::InvalidConfig(_) | E::InvalidSpace(_) | E::OutOfBounds { .. } => {
                    StatusCode::BAD_REQUEST
                }
                E::UnknownSuggestion(_)
                | E::DuplicateMeasurement(_)
                | E::SessionFinished
                | E::NotReady(_) => StatusCode::CONFLICT,
                E::NonFinite(_) | E::DimensionMismatch { .. } => StatusCode::UNPROCESSABLE_ENTITY,
                E::NoCycleCompleted => StatusCode::CONFLICT,
                _ => StatusCode::INTERNAL_SERVER_ERROR,
            },
            Self::Corrupt(..) | Self::Io(_) | Self::Json(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = self.status();
        if status.is_server_error() {
            tracing::error!(error = %self, "request failed");
        }
        (status, Json(json!({ "error": self.to_string() }))).into_response()
    }
}
