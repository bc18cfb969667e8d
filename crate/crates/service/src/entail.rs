//! `POST /v1/entail` in front of any entailment adapter.

use std::sync::Arc;

use argnli_core::entailment::wire::{EntailRequest, EntailResponse, ENTAIL_PATH};
use argnli_core::entailment::{BackendError, EntailmentBackend};
use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::Router;

use crate::error::{parse_body, ApiError};

pub type Adapter = Arc<dyn EntailmentBackend>;

pub fn entail_router(adapter: Adapter) -> Router {
    Router::new()
        .route(ENTAIL_PATH, post(entail))
        .with_state(adapter)
}

async fn entail(State(adapter): State<Adapter>, body: Bytes) -> Result<Response, ApiError> {
    let req: EntailRequest = parse_body(&body)?;
    if req.pairs.is_empty() {
        return Err(ApiError::bad_request("request has no pairs"));
    }
    if let Some(i) = req.pairs.iter().position(|p| !p.is_valid()) {
        return Err(ApiError::bad_request(format!(
            "pair {i} has an empty premise or hypothesis"
        )));
    }
    let EntailRequest { id, pairs } = req;
    let n = pairs.len();
    let scored = tokio::task::spawn_blocking(move || adapter.score(&pairs))
        .await
        .map_err(|e| ApiError::internal(format!("scoring task failed: {e}")))?;
    let judgments = match scored {
        Ok(j) => j,
        Err(BackendError::Unavailable(m)) => {
            return Err(ApiError::new(StatusCode::SERVICE_UNAVAILABLE, m))
        }
        Err(e) => return Err(ApiError::new(StatusCode::BAD_GATEWAY, e.to_string())),
    };
    if judgments.len() != n {
        return Err(ApiError::new(
            StatusCode::BAD_GATEWAY,
            format!(
                "adapter returned {} judgments for {n} pairs",
                judgments.len()
            ),
        ));
    }
    if let Some(i) = judgments.iter().position(|j| !j.is_valid()) {
        return Err(ApiError::new(
            StatusCode::BAD_GATEWAY,
            format!(
                "adapter judgment {i} ({}) is not a distribution",
                judgments[i]
            ),
        ));
    }
    let body = EntailResponse { id, judgments }.to_body();
    Ok(([(header::CONTENT_TYPE, "application/json")], body).into_response())
}
