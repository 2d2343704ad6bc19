use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use nsp_core::model::ModelError;
use nsp_core::search::SearchError;

/// Error body returned by every endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(default)]
    pub details: Value,
}

#[derive(Debug, Clone)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>, details: Value) -> Self {
        ApiError {
            status,
            body: ErrorBody { code: code.into(), message: message.into(), details },
        }
    }

    pub fn not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", format!("no session `{id}`"), json!({ "session_id": id }))
    }

    pub fn conflict(message: impl Into<String>, details: Value) -> Self {
        Self::new(StatusCode::CONFLICT, "conflict", message, details)
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message, Value::Null)
    }

    pub fn unauthorized() -> Self {
        Self::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or invalid bearer token", Value::Null)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message, Value::Null)
    }

    /// 422 carrying the validation report of an instance document.
    pub fn invalid_instance(err: &ModelError) -> Self {
        let details = match err {
            ModelError::Parse { path, message } => json!({ "errors": [{ "path": path, "message": message }] }),
            ModelError::Validation(list) => {
                json!({ "errors": list.iter().map(|m| json!({ "message": m })).collect::<Vec<_>>() })
            }
        };
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_instance", err.to_string(), details)
    }

    pub fn invalid_search(err: &SearchError) -> Self {
        match err {
            SearchError::Directive(list) => Self::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "invalid_directives",
                err.to_string(),
                json!({ "errors": list.iter().map(|m| json!({ "message": m })).collect::<Vec<_>>() }),
            ),
            SearchError::Config(m) => Self::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "invalid_config",
                err.to_string(),
                json!({ "errors": [{ "message": m }] }),
            ),
            SearchError::Model(m) => Self::invalid_instance(m),
        }
    }

    pub fn invalid_body(what: &str, err: &serde_json::Error) -> Self {
        Self::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            &format!("invalid_{what}"),
            format!("malformed {what}: {err}"),
            json!({ "errors": [{ "line": err.line(), "column": err.column(), "message": err.to_string() }] }),
        )
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}
