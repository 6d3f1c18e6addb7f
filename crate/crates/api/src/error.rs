use agriflow_core::connectors::ConnectorError;
use agriflow_core::engine::{EngineError, FieldError};
use agriflow_core::model::DefinitionError;
use agriflow_core::platform::PlatformError;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;

/// The uniform error envelope.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    pub details: Vec<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {}: {}", self.status.as_u16(), self.body.code, self.body.message)
    }
}

impl std::error::Error for ApiError {}

pub type ApiResult<T> = Result<T, ApiError>;

fn fields(details: &[FieldError]) -> Vec<serde_json::Value> {
    details
        .iter()
        .map(|d| serde_json::json!({ "field": d.field, "message": d.message }))
        .collect()
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> ApiError {
        ApiError {
            status,
            body: ErrorBody {
                code: code.into(),
                message: message.into(),
                details: Vec::new(),
            },
        }
    }

    pub fn with_details(mut self, details: Vec<serde_json::Value>) -> ApiError {
        self.body.details = details;
        self
    }

    pub fn unauthenticated(message: &str) -> ApiError {
        ApiError::new(StatusCode::UNAUTHORIZED, "unauthenticated", message)
    }

    pub fn forbidden(message: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::FORBIDDEN, "forbidden", message)
    }

    pub fn not_found(message: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    pub fn bad_request(message: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    pub fn invalid(message: impl Into<String>, details: &[FieldError]) -> ApiError {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "validation_failed", message).with_details(fields(details))
    }

    pub fn internal(message: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl From<DefinitionError> for ApiError {
    fn from(e: DefinitionError) -> Self {
        let details = match &e {
            DefinitionError::Syntax { line, column, message } => {
                vec![serde_json::json!({ "line": line, "column": column, "message": message })]
            }
            DefinitionError::Invalid(vs) => vs
                .iter()
                .map(|v| {
                    let mut j = serde_json::to_value(v).unwrap_or_default();
                    if let Some(o) = j.as_object_mut() {
                        o.insert("message".into(), v.to_string().into());
                    }
                    j
                })
                .collect(),
        };
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_definition", e.to_string()).with_details(details)
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::NotFound(m) => ApiError::not_found(m),
            EngineError::Forbidden(m) => ApiError::forbidden(m),
            EngineError::Conflict(m) => ApiError::new(StatusCode::CONFLICT, "conflict", m),
            EngineError::Validation { message, details } => ApiError::invalid(message, &details),
            EngineError::Definition(d) => d.into(),
            EngineError::Storage(s) => ApiError::internal(s.to_string()),
        }
    }
}

impl From<ConnectorError> for ApiError {
    fn from(e: ConnectorError) -> Self {
        let message = e.to_string();
        match e {
            ConnectorError::UnknownKind(_) | ConnectorError::WrongMode { .. } => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "unknown_kind", message)
            }
            ConnectorError::Schema { details, .. } | ConnectorError::Malformed(details) => {
                ApiError::invalid(message, &details)
            }
            ConnectorError::Provider(_) => ApiError::new(StatusCode::BAD_GATEWAY, "provider_failure", message),
            ConnectorError::Storage(_) => ApiError::internal(message),
        }
    }
}

impl From<PlatformError> for ApiError {
    fn from(e: PlatformError) -> Self {
        match e {
            PlatformError::Engine(e) => e.into(),
            PlatformError::Connector(e) => e.into(),
            PlatformError::NotFound(m) => ApiError::not_found(m),
            PlatformError::Clock(c) => ApiError::new(StatusCode::CONFLICT, "clock", c.to_string()),
            PlatformError::Journal(j) => ApiError::internal(j.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}
