use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use axum::body::{to_bytes, Body, Bytes};
use axum::extract::{Request, State};
use axum::http::{HeaderMap, HeaderValue, Method, StatusCode};
use axum::middleware::Next;
use axum::response::{IntoResponse, Response};
use tokio::sync::Mutex;

use crate::error::{ApiError, ErrorCode};
use crate::AppState;

pub const IDEMPOTENCY_HEADER: &str = "idempotency-key";
pub const REPLAY_HEADER: &str = "idempotent-replay";

const MAX_BODY: usize = 4 * 1024 * 1024;

struct Stored {
    fingerprint: u64,
    status: StatusCode,
    headers: HeaderMap,
    body: Bytes,
}

/// Responses to keyed mutating requests. The lock is held while the
/// handler runs, so two concurrent requests with one key execute once.
#[derive(Default)]
pub struct IdempotencyCache {
    entries: Mutex<HashMap<String, Stored>>,
}

fn fingerprint(method: &Method, path: &str, body: &[u8]) -> u64 {
    let mut h = DefaultHasher::new();
    method.as_str().hash(&mut h);
    path.hash(&mut h);
    body.hash(&mut h);
    h.finish()
}

fn replay(stored: &Stored) -> Response {
    let mut resp = Response::new(Body::from(stored.body.clone()));
    *resp.status_mut() = stored.status;
    *resp.headers_mut() = stored.headers.clone();
    resp.headers_mut().insert(REPLAY_HEADER, HeaderValue::from_static("true"));
    resp
}

pub async fn idempotent(State(state): State<Arc<AppState>>, req: Request, next: Next) -> Response {
    if matches!(*req.method(), Method::GET | Method::HEAD | Method::OPTIONS) {
        return next.run(req).await;
    }
    let Some(key) = req
        .headers()
        .get(IDEMPOTENCY_HEADER)
        .and_then(|v| v.to_str().ok())
        .map(str::to_string)
    else {
        return next.run(req).await;
    };
    let (parts, body) = req.into_parts();
    let bytes = match to_bytes(body, MAX_BODY).await {
        Ok(b) => b,
        Err(e) => return ApiError::bad_request(format!("request body: {e}")).into_response(),
    };
    let fp = fingerprint(&parts.method, parts.uri.path(), &bytes);

    let mut entries = state.idempotency.entries.lock().await;
    if let Some(stored) = entries.get(&key) {
        if stored.fingerprint != fp {
            return ApiError::new(ErrorCode::Conflict, "idempotency key was already used for a different request")
                .into_response();
        }
        return replay(stored);
    }

    let resp = next.run(Request::from_parts(parts, Body::from(bytes))).await;
    let (parts, body) = resp.into_parts();
    let body = match to_bytes(body, usize::MAX).await {
        Ok(b) => b,
        Err(e) => return ApiError::internal(format!("response body: {e}")).into_response(),
    };
    if !parts.status.is_server_error() {
        entries.insert(
            key,
            Stored {
                fingerprint: fp,
                status: parts.status,
                headers: parts.headers.clone(),
                body: body.clone(),
            },
        );
    }
    Response::from_parts(parts, Body::from(body))
}
