//! HTTP session service for interactive roster solving.
//!
//! Each session owns an instance, a search configuration and a directive
//! set, and runs at most one search worker. Incumbents are appended to a
//! per-session event log that clients replay and follow over a server-sent
//! event stream.

mod error;
mod events;
mod session;
mod store;

use std::collections::HashMap;
use std::convert::Infallible;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::middleware::{self, Next};
use axum::response::sse::{Event as SseEvent, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use futures::{Stream, StreamExt};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use nsp_core::search::{CellDirectives, SearchConfig};
use nsp_core::Instance;

pub use error::{ApiError, ErrorBody};
pub use events::{EventLog, IncumbentEvent, StreamItem};
pub use session::{Command, DirectivePatch, SessionHandle, SessionState, SessionView, Solution};
pub use store::{SessionMeta, Store, StoredSession};

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Bearer token required on every endpoint but `/healthz`. `None`
    /// disables authentication.
    pub token: Option<String>,
    /// Persistence root; `None` keeps sessions in memory only.
    pub store_dir: Option<PathBuf>,
    /// Live events buffered per stream consumer before it is marked as
    /// lagging.
    pub event_capacity: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig { token: None, store_dir: None, event_capacity: 256 }
    }
}

pub struct AppState {
    config: ServiceConfig,
    store: Option<Arc<Store>>,
    sessions: RwLock<HashMap<String, Arc<SessionHandle>>>,
}

impl AppState {
    /// Opens the store, if any, and recovers its sessions.
    pub fn new(config: ServiceConfig) -> std::io::Result<Arc<AppState>> {
        let store = config.store_dir.as_ref().map(Store::open).transpose()?.map(Arc::new);
        let mut sessions = HashMap::new();
        if let Some(store) = &store {
            for stored in store.load_all()? {
                let h = SessionHandle::recover(stored, config.event_capacity, Some(store.clone()));
                sessions.insert(h.id().to_string(), h);
            }
        }
        Ok(Arc::new(AppState { config, store, sessions: RwLock::new(sessions) }))
    }

    pub fn session(&self, id: &str) -> Result<Arc<SessionHandle>, ApiError> {
        self.sessions.read().unwrap().get(id).cloned().ok_or_else(|| ApiError::not_found(id))
    }

    pub fn session_count(&self) -> usize {
        self.sessions.read().unwrap().len()
    }
}

/// Body of `POST /sessions`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateSession {
    pub instance: Value,
    pub config: SearchConfig,
    #[serde(default)]
    pub directives: CellDirectives,
}

pub fn router(state: Arc<AppState>) -> Router {
    let api = Router::new()
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/control", post(control))
        .route("/sessions/{id}/directives", patch(update_directives).get(get_directives))
        .route("/sessions/{id}/solution", get(solution))
        .route("/sessions/{id}/events", get(events))
        .route_layer(middleware::from_fn_with_state(state.clone(), auth));
    Router::new().route("/healthz", get(healthz)).merge(api).with_state(state)
}

async fn auth(State(state): State<Arc<AppState>>, req: Request, next: Next) -> Response {
    if let Some(token) = &state.config.token {
        let given = req
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        if given != Some(token.as_str()) {
            return ApiError::unauthorized().into_response();
        }
    }
    next.run(req).await
}

async fn healthz(State(state): State<Arc<AppState>>) -> Json<Value> {
    Json(json!({ "status": "ok", "sessions": state.session_count() }))
}

fn parse<T: serde::de::DeserializeOwned>(what: &str, body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::invalid_body(what, &e))
}

async fn create_session(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Response, ApiError> {
    let req: CreateSession = parse("request", &body)?;
    let instance = Instance::from_json(&req.instance.to_string()).map_err(|e| ApiError::invalid_instance(&e))?;
    let id = format!("s-{}", uuid::Uuid::new_v4().simple());
    let handle = SessionHandle::create(
        id.clone(),
        instance,
        req.config,
        req.directives,
        state.config.event_capacity,
        state.store.clone(),
    )?;
    let view = handle.view();
    state.sessions.write().unwrap().insert(id, handle);
    Ok((StatusCode::CREATED, Json(view)).into_response())
}

async fn list_sessions(State(state): State<Arc<AppState>>) -> Json<Vec<SessionView>> {
    let mut views: Vec<SessionView> = state.sessions.read().unwrap().values().map(|h| h.view()).collect();
    views.sort_by(|a, b| a.id.cmp(&b.id));
    Json(views)
}

async fn get_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<SessionView>, ApiError> {
    Ok(Json(state.session(&id)?.view()))
}

async fn control(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let handle = state.session(&id)?;
    let cmd: Command = parse("command", &body)?;
    let new_state = handle.control(cmd)?;
    Ok(Json(json!({ "id": id, "state": new_state })))
}

async fn update_directives(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let handle = state.session(&id)?;
    let patch: DirectivePatch = parse("directives", &body)?;
    let revision = handle.update_directives(&patch)?;
    Ok(Json(json!({ "id": id, "revision": revision, "directives": handle.directives() })))
}

async fn get_directives(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<Json<CellDirectives>, ApiError> {
    Ok(Json(state.session(&id)?.directives()))
}

async fn solution(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<Solution>, ApiError> {
    Ok(Json(state.session(&id)?.solution()))
}

#[derive(Debug, Deserialize)]
struct EventsQuery {
    from_sequence: Option<u64>,
}

async fn events(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<EventsQuery>,
    headers: HeaderMap,
) -> Result<Sse<impl Stream<Item = Result<SseEvent, Infallible>>>, ApiError> {
    let handle = state.session(&id)?;
    let last_id = headers
        .get("last-event-id")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.trim().parse::<u64>().ok());
    let from = q.from_sequence.or(last_id.map(|s| s + 1)).unwrap_or(0);
    let stream = handle.log().stream(from).map(|item| Ok(sse_event(&item)));
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}

fn sse_event(item: &StreamItem) -> SseEvent {
    match item {
        StreamItem::Incumbent(e) => SseEvent::default()
            .event("incumbent")
            .id(e.sequence.to_string())
            .json_data(&**e)
            .expect("incumbent serializes"),
        StreamItem::Gap { missed, last_seen } => SseEvent::default()
            .event("gap")
            .json_data(json!({ "missed": missed, "last_seen": last_seen }))
            .expect("gap serializes"),
        StreamItem::End => SseEvent::default()
            .event("end")
            .json_data(json!({ "state": SessionState::Stopped }))
            .expect("end serializes"),
    }
}
