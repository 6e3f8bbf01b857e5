//! HTTP and WebSocket service. All routes live under `/v1`:
//!
//! * `GET  /v1/health`
//! * `POST /v1/sessions` — optional body `{"session_id": "..."}`
//! * `POST /v1/sessions/{id}/messages` — body `{"text": "..."}`
//! * `GET  /v1/sessions/{id}/tracker?events=N`
//! * `GET  /v1/sessions/{id}/ws` — send `{"text": "..."}`, receive turn
//!   payloads identical to the HTTP responses

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use crate::engine::{Engine, TurnDebug};
use crate::executor::{BotUtterance, TurnState};
use crate::state::{MemoryStore, Tracker, TrackerSnapshot, TrackerStore};

type Session = Arc<tokio::sync::Mutex<Tracker>>;

pub struct AppState {
    engine: Engine,
    store: Arc<dyn TrackerStore>,
    sessions: Mutex<HashMap<String, Session>>,
}

impl AppState {
    pub fn new(engine: Engine, store: Arc<dyn TrackerStore>) -> Arc<Self> {
        Arc::new(Self {
            engine,
            store,
            sessions: Mutex::new(HashMap::new()),
        })
    }

    pub fn in_memory(engine: Engine) -> Arc<Self> {
        Self::new(engine, Arc::new(MemoryStore::new()))
    }

    fn session(&self, id: &str) -> Result<Session, ApiError> {
        let mut sessions = self.sessions.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(s) = sessions.get(id) {
            return Ok(s.clone());
        }
        match self.store.load(id) {
            Ok(Some(tracker)) => {
                let session = Arc::new(tokio::sync::Mutex::new(tracker));
                sessions.insert(id.to_string(), session.clone());
                Ok(session)
            }
            Ok(None) | Err(crate::state::StoreError::InvalidId(_)) => {
                Err(ApiError::new(StatusCode::NOT_FOUND, format!("unknown session `{id}`")))
            }
            Err(e) => Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())),
        }
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }
}

#[derive(Serialize)]
struct ErrorBody {
    error: String,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(ErrorBody { error: self.message })).into_response()
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    session_id: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct UserMessage {
    text: String,
}

/// One turn, as returned over HTTP and WebSocket.
#[derive(Debug, Clone, Serialize)]
pub struct TurnResponse {
    pub session_id: String,
    pub messages: Vec<BotUtterance>,
    pub state: TurnState,
    pub debug: TurnDebug,
}

#[derive(Debug, Deserialize)]
struct SnapshotQuery {
    events: Option<usize>,
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}/messages", post(post_message))
        .route("/v1/sessions/{id}/tracker", get(get_tracker))
        .route("/v1/sessions/{id}/ws", get(websocket))
        .with_state(state)
}

/// Serves until Ctrl-C.
pub async fn serve(state: Arc<AppState>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed body: {e}")))
}

async fn create_session(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Response, ApiError> {
    let request: CreateSession = if body.iter().all(u8::is_ascii_whitespace) {
        CreateSession::default()
    } else {
        parse_body(&body)?
    };
    let id = request
        .session_id
        .unwrap_or_else(|| uuid::Uuid::new_v4().simple().to_string());
    let valid = !id.is_empty()
        && id.len() <= 128
        && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
    if !valid {
        return Err(ApiError::bad_request("session ids use letters, digits, `-` and `_`"));
    }
    let tracker = state.engine.new_tracker(id.clone());
    {
        let mut sessions = state.sessions.lock().unwrap_or_else(|e| e.into_inner());
        if sessions.contains_key(&id) || matches!(state.store.load(&id), Ok(Some(_))) {
            return Err(ApiError::new(StatusCode::CONFLICT, format!("session `{id}` already exists")));
        }
        sessions.insert(id.clone(), Arc::new(tokio::sync::Mutex::new(tracker.clone())));
    }
    state
        .store
        .save(&tracker)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    Ok((StatusCode::CREATED, Json(SessionCreated { session_id: id })).into_response())
}

/// Runs one turn; turns of the same session are serialized by the
/// session lock.
async fn run_turn(state: &Arc<AppState>, id: &str, text: String) -> Result<TurnResponse, ApiError> {
    let session = state.session(id)?;
    let mut tracker = session.lock_owned().await;
    let engine = state.engine.clone();
    let (tracker, report) = tokio::task::spawn_blocking(move || {
        let report = engine.run_turn(&mut tracker, &text);
        (tracker, report)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    state
        .store
        .save(&tracker)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    Ok(TurnResponse {
        session_id: id.to_string(),
        messages: report.messages,
        state: report.state,
        debug: report.debug,
    })
}

async fn post_message(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<TurnResponse>, ApiError> {
    state.session(&id)?;
    let message: UserMessage = parse_body(&body)?;
    run_turn(&state, &id, message.text).await.map(Json)
}

async fn get_tracker(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(query): Query<SnapshotQuery>,
) -> Result<Json<TrackerSnapshot>, ApiError> {
    let session = state.session(&id)?;
    let tracker = session.lock().await;
    Ok(Json(tracker.snapshot(query.events.unwrap_or(50))))
}

async fn websocket(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    upgrade: WebSocketUpgrade,
) -> Result<Response, ApiError> {
    state.session(&id)?;
    Ok(upgrade.on_upgrade(move |socket| handle_socket(socket, state, id)))
}

async fn handle_socket(mut socket: WebSocket, state: Arc<AppState>, id: String) {
    while let Some(Ok(message)) = socket.recv().await {
        let text = match message {
            Message::Text(t) => t.to_string(),
            Message::Close(_) => break,
            _ => continue,
        };
        let reply = match parse_body::<UserMessage>(text.as_bytes()) {
            Ok(m) => match run_turn(&state, &id, m.text).await {
                Ok(turn) => serde_json::to_string(&turn),
                Err(e) => serde_json::to_string(&ErrorBody { error: e.message }),
            },
            Err(e) => serde_json::to_string(&ErrorBody { error: e.message }),
        };
        let Ok(reply) = reply else { break };
        if socket.send(Message::Text(reply.into())).await.is_err() {
            break;
        }
    }
}
