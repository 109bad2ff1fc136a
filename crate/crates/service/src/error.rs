use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use ftcp_core::ftcp::WhatIfError;
use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("unknown player `{0}`")]
    UnknownPlayer(String),
    #[error("unknown solve {0}")]
    UnknownSolve(u64),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Fixing(#[from] WhatIfError),
    #[error("solve {0} is still running")]
    Busy(u64),
    #[error("{0}")]
    Internal(String),
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::UnknownSession(_) | ApiError::UnknownPlayer(_) | ApiError::UnknownSolve(_) => StatusCode::NOT_FOUND,
            ApiError::Fixing(WhatIfError::UnknownPlayer(_)) => StatusCode::NOT_FOUND,
            ApiError::Fixing(_) | ApiError::Busy(_) => StatusCode::CONFLICT,
            ApiError::Invalid(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.to_string() });
        if let ApiError::Fixing(WhatIfError::Conflict {
            player,
            decision,
            value,
            constraint,
        }) = &self
        {
            body["player"] = json!(player);
            body["decision"] = json!(decision);
            body["value"] = json!(value);
            body["constraint"] = json!(constraint);
        }
        (self.status(), Json(body)).into_response()
    }
}
