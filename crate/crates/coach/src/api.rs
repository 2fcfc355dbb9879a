//! HTTP/JSON API, version 1. Schemas are documented in `docs/api.md`.

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use rally_core::Termination;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::error::SessionError;
use crate::session::Session;
use crate::store::{CreateRequest, SessionStore};

pub const API_VERSION: u32 = 1;

pub fn router(store: Arc<SessionStore>) -> Router {
    Router::new()
        .route("/", get(info))
        .route("/sessions", post(create).get(list))
        .route("/sessions/{id}", get(state))
        .route("/sessions/{id}/shots", post(record_shot))
        .route("/sessions/{id}/rally-end", post(rally_end))
        .route("/sessions/{id}/advice", get(advice))
        .route("/sessions/{id}/whatif", post(whatif))
        .route("/sessions/{id}/undo", post(undo))
        .route("/sessions/{id}/export", get(export))
        .with_state(store)
}

pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let status = match &e {
            SessionError::UnknownSession(_) => StatusCode::NOT_FOUND,
            SessionError::NothingToUndo | SessionError::NoRally => StatusCode::CONFLICT,
            SessionError::Io { .. } | SessionError::Log(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError { status, code: e.code(), message: e.to_string() }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError { status: StatusCode::BAD_REQUEST, code: "bad_request", message: e.body_text() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": { "code": self.code, "message": self.message } }))).into_response()
    }
}

type ApiResult = Result<Json<Value>, ApiError>;

async fn info(State(store): State<Arc<SessionStore>>) -> Json<Value> {
    Json(json!({
        "service": "rallycoach",
        "api_version": API_VERSION,
        "datasets": store.datasets().map(|(name, d)| json!({
            "name": name,
            "version": d.version(),
            "players": d.players(),
            "rallies": d.rally_count(),
        })).collect::<Vec<_>>(),
        "policies": store.registry().iter().map(|p| json!({
            "name": p.name(),
            "description": p.description(),
        })).collect::<Vec<_>>(),
        "defaults": store.defaults(),
    }))
}

async fn create(
    State(store): State<Arc<SessionStore>>,
    body: Result<Json<CreateRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<Value>), ApiError> {
    let Json(req) = body?;
    let session = store.create(req)?;
    Ok((StatusCode::CREATED, Json(session.summary())))
}

async fn list(State(store): State<Arc<SessionStore>>) -> Json<Value> {
    Json(json!({ "sessions": store.ids() }))
}

async fn state(State(store): State<Arc<SessionStore>>, Path(id): Path<String>) -> ApiResult {
    Ok(Json(store.get(&id)?.summary()))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ShotBody {
    actor: String,
    shot: String,
}

async fn record_shot(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
    body: Result<Json<ShotBody>, JsonRejection>,
) -> ApiResult {
    let Json(b) = body?;
    let session = store.record_shot(&id, &b.actor, &b.shot)?;
    Ok(Json(with_warnings(&session)))
}

fn with_warnings(session: &Session) -> Value {
    let mut v = session.summary();
    v["warnings"] = json!(session.soft_warnings());
    v
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RallyEndBody {
    winner: String,
    termination: Termination,
}

async fn rally_end(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
    body: Result<Json<RallyEndBody>, JsonRejection>,
) -> ApiResult {
    let Json(b) = body?;
    Ok(Json(store.rally_end(&id, &b.winner, b.termination)?.summary()))
}

async fn advice(State(store): State<Arc<SessionStore>>, Path(id): Path<String>) -> ApiResult {
    let session = store.get(&id)?;
    Ok(Json(session.advise().to_json(session.taxonomy())))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WhatIfBody {
    shot: String,
}

async fn whatif(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
    body: Result<Json<WhatIfBody>, JsonRejection>,
) -> ApiResult {
    let Json(b) = body?;
    let session = store.get(&id)?;
    let w = session.whatif(&b.shot, store.registry())?;
    Ok(Json(w.to_json(&session)))
}

async fn undo(State(store): State<Arc<SessionStore>>, Path(id): Path<String>) -> ApiResult {
    Ok(Json(store.undo(&id)?.summary()))
}

async fn export(State(store): State<Arc<SessionStore>>, Path(id): Path<String>) -> ApiResult {
    let e = store.get(&id)?.export()?;
    Ok(Json(serde_json::to_value(e).expect("export serializes")))
}
