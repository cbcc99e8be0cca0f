use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use storykg_core::annotation::AnnotationError;
use storykg_core::validation::ValidationError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    BadRequest,
    NotFound,
    Conflict,
    StateError,
    Internal,
}

impl ErrorCode {
    pub fn status(self) -> StatusCode {
        match self {
            ErrorCode::BadRequest => StatusCode::BAD_REQUEST,
            ErrorCode::NotFound => StatusCode::NOT_FOUND,
            ErrorCode::Conflict | ErrorCode::StateError => StatusCode::CONFLICT,
            ErrorCode::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
    #[serde(default)]
    pub detail: Value,
}

impl ApiError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        ApiError {
            code,
            message: message.into(),
            detail: Value::Null,
        }
    }

    pub fn with_detail(mut self, detail: Value) -> Self {
        self.detail = detail;
        self
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(ErrorCode::BadRequest, message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        ApiError::new(ErrorCode::NotFound, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        ApiError::new(ErrorCode::Internal, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.code == ErrorCode::Internal {
            tracing::error!(message = %self.message, "request failed");
        }
        (self.code.status(), Json(self)).into_response()
    }
}

impl From<AnnotationError> for ApiError {
    fn from(e: AnnotationError) -> Self {
        let message = e.to_string();
        match e {
            AnnotationError::State { state, event } => {
                ApiError::new(ErrorCode::StateError, message).with_detail(json!({ "state": state, "event": event }))
            }
            AnnotationError::Validation { violations } => {
                ApiError::bad_request(message).with_detail(json!({ "violations": violations }))
            }
            AnnotationError::Export { missing } => {
                ApiError::new(ErrorCode::Conflict, message).with_detail(json!({ "missing_stories": missing }))
            }
            AnnotationError::Load { .. } | AnnotationError::Import { .. } => ApiError::bad_request(message),
            AnnotationError::Persistence(_) => ApiError::internal(message),
        }
    }
}

impl From<ValidationError> for ApiError {
    fn from(e: ValidationError) -> Self {
        let message = e.to_string();
        match e {
            ValidationError::Invalid(problems) => {
                ApiError::bad_request(message).with_detail(json!({ "violations": problems }))
            }
            ValidationError::Sampling { .. } | ValidationError::NoValidator(_) => ApiError::bad_request(message),
            ValidationError::UnknownTask(_) => ApiError::not_found(message),
            ValidationError::Conflict(_) => ApiError::new(ErrorCode::Conflict, message),
            ValidationError::Persistence(_) => ApiError::internal(message),
        }
    }
}
