use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::json;

use hyperslice_core::partition::ParseError;

/// Error returned by every handler, mapped onto an HTTP status.
#[derive(Debug)]
pub enum ApiError {
    /// 400: malformed or out-of-range input.
    BadRequest(String),
    /// 404: unknown session, job, run or timestep.
    NotFound(String),
    /// 409: an upstream stage has not been computed for the current inputs.
    Stale(String),
    /// 422: projection expression did not parse.
    Parse(ParseError),
    /// 500: environment failure such as an unreadable file.
    Internal(String),
}

impl ApiError {
    pub fn stale(what: &str) -> Self {
        ApiError::Stale(format!("{what} has not been computed for the current inputs"))
    }
}

impl From<hyperslice_core::Error> for ApiError {
    fn from(e: hyperslice_core::Error) -> Self {
        match e {
            hyperslice_core::Error::Parse(p) => ApiError::Parse(p),
            e if e.is_validation() => ApiError::BadRequest(e.to_string()),
            e => ApiError::Internal(e.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match self {
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, json!({ "error": m })),
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, json!({ "error": m })),
            ApiError::Stale(m) => (StatusCode::CONFLICT, json!({ "error": m })),
            ApiError::Parse(p) => (
                StatusCode::UNPROCESSABLE_ENTITY,
                json!({ "error": p.to_string(), "position": p.position, "kind": p.kind }),
            ),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": m })),
        };
        (status, Json(body)).into_response()
    }
}

pub type ApiResult<T> = Result<T, ApiError>;
