//! HTTP+JSON routes.
//!
//! | method | path                   | body             | success |
//! |--------|------------------------|------------------|---------|
//! | POST   | `/sessions`            | `{user_id, mode}`| 201 descriptor |
//! | POST   | `/sessions/{id}/clicks`| `{x1, x2}`       | 200 click result with history |
//! | GET    | `/sessions/{id}`       |                  | 200 session view |
//! | POST   | `/sessions/{id}/finish`|                  | 200 summary |
//!
//! Errors carry `{"error": kind, "message": text}` with kind one of
//! `validation` (422), `not_found` (404), `state` (409), `storage` (500)
//! and `bad_request` (400, malformed JSON).

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;

use crate::error::ServiceError;
use crate::sessions::GameService;

#[derive(Debug, Deserialize)]
pub struct CreateRequest {
    pub user_id: String,
    pub mode: u8,
}

#[derive(Debug, Deserialize)]
pub struct ClickRequest {
    pub x1: f64,
    pub x2: f64,
}

pub fn router(service: Arc<GameService>) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(state))
        .route("/sessions/{id}/clicks", post(click))
        .route("/sessions/{id}/finish", post(finish))
        .with_state(service)
}

fn bad_request(r: JsonRejection) -> Response {
    let body = serde_json::json!({ "error": "bad_request", "message": r.body_text() });
    (StatusCode::BAD_REQUEST, Json(body)).into_response()
}

async fn create(
    State(svc): State<Arc<GameService>>,
    body: Result<Json<CreateRequest>, JsonRejection>,
) -> Response {
    let Json(req) = match body {
        Ok(b) => b,
        Err(r) => return bad_request(r),
    };
    match svc.create_session(&req.user_id, req.mode) {
        Ok(d) => (StatusCode::CREATED, Json(d)).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn click(
    State(svc): State<Arc<GameService>>,
    Path(id): Path<String>,
    body: Result<Json<ClickRequest>, JsonRejection>,
) -> Response {
    let Json(req) = match body {
        Ok(b) => b,
        Err(r) => return bad_request(r),
    };
    respond(svc.click(&id, req.x1, req.x2))
}

async fn state(State(svc): State<Arc<GameService>>, Path(id): Path<String>) -> Response {
    respond(svc.state(&id))
}

async fn finish(State(svc): State<Arc<GameService>>, Path(id): Path<String>) -> Response {
    respond(svc.finish(&id))
}

fn respond<T: serde::Serialize>(r: Result<T, ServiceError>) -> Response {
    match r {
        Ok(v) => Json(v).into_response(),
        Err(e) => e.into_response(),
    }
}
