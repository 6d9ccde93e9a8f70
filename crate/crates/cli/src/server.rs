//! HTTP routes over [`SessionStore`].

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use cascade_core::io::from_json;
use serde::de::DeserializeOwned;

use crate::api::{ApiError, ApiResult, SessionStore, SolveRequest, SortingRequest};

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self.body())).into_response()
    }
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    let text = std::str::from_utf8(body).map_err(|e| ApiError::bad_request(format!("body is not UTF-8: {e}")))?;
    Ok(from_json(text)?)
}

/// Runs a store call off the async workers; solves can take a while.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError {
        status: 500,
        kind: "Internal".into(),
        message: e.to_string(),
        detail: None,
    })?
}

async fn create(State(store): State<Arc<SessionStore>>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let text = String::from_utf8(body.to_vec()).map_err(|e| ApiError::bad_request(format!("body is not UTF-8: {e}")))?;
    let view = blocking(move || store.create_from_json(&text)).await?;
    Ok((StatusCode::CREATED, Json(view)))
}

async fn show(State(store): State<Arc<SessionStore>>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(store.get(&id)?))
}

async fn remove(State(store): State<Arc<SessionStore>>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    store.delete(&id)?;
    Ok(StatusCode::NO_CONTENT)
}

async fn sorting_set(State(store): State<Arc<SessionStore>>, Path(id): Path<String>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let req: SortingRequest = parse_body(&body)?;
    Ok(Json(blocking(move || store.choose_sorting_set(&id, &req)).await?))
}

async fn solve(State(store): State<Arc<SessionStore>>, Path(id): Path<String>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let req: SolveRequest = if body.iter().all(u8::is_ascii_whitespace) { SolveRequest::default() } else { parse_body(&body)? };
    Ok(Json(blocking(move || store.solve(&id, &req)).await?))
}

async fn slacks(State(store): State<Arc<SessionStore>>, Path(id): Path<String>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let req = parse_body(&body)?;
    Ok(Json(blocking(move || store.apply_slacks(&id, &req)).await?))
}

pub fn router(store: Arc<SessionStore>) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(show).delete(remove))
        .route("/sessions/{id}/sorting-set", post(sorting_set))
        .route("/sessions/{id}/solve", post(solve))
        .route("/sessions/{id}/slacks", post(slacks))
        .with_state(store)
}

/// Binds `addr` and serves until the process is stopped. Idle sessions are
/// purged periodically when the store has a timeout.
pub async fn serve(addr: SocketAddr, store: Arc<SessionStore>) -> std::io::Result<()> {
    if let Some(idle) = store.idle_timeout() {
        let sweeper = store.clone();
        let period = (idle / 2).clamp(Duration::from_secs(1), Duration::from_secs(60));
        tokio::spawn(async move {
            let mut tick = tokio::time::interval(period);
            loop {
                tick.tick().await;
                sweeper.purge_expired();
            }
        });
    }
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(store)).await
}
