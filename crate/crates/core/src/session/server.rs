//! HTTP and WebSocket front end for sessions.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::{broadcast, Mutex, RwLock};
use tokio::task::JoinHandle;

use super::telemetry::{Telemetry, WorldView};
use super::{Phase, Scenario, Session, SessionError, SessionOptions};
use crate::agent::{Gateway, GatewayConfig, MockGateway};
use crate::behavior::OwnershipMap;
use crate::geometry::Pose;

pub type GatewayFactory = Arc<dyn Fn(&Scenario) -> Result<Box<dyn Gateway>, SessionError> + Send + Sync>;

/// Gateway from a fixed config, or the scenario's own mock script.
pub fn gateway_factory(config: Option<GatewayConfig>) -> GatewayFactory {
    Arc::new(move |s: &Scenario| match (&config, &s.mock_script) {
        (Some(c), _) => Ok(c.build()?),
        (None, Some(p)) => Ok(Box::new(MockGateway::load(p)?)),
        (None, None) => Err(SessionError::BadRequest("scenario has no mock_script and the server has no gateway config".into())),
    })
}

#[derive(Clone)]
pub struct ServerOptions {
    pub heartbeat: Duration,
    pub realtime: bool,
    pub tick_ms: Option<f64>,
}

impl Default for ServerOptions {
    fn default() -> Self {
        Self { heartbeat: Duration::from_secs(1), realtime: false, tick_ms: None }
    }
}

struct Handle {
    session: Arc<Mutex<Session>>,
    telemetry: Arc<Telemetry>,
    heartbeat: JoinHandle<()>,
}

impl Drop for Handle {
    fn drop(&mut self) {
        self.heartbeat.abort();
    }
}

pub struct AppState {
    sessions: RwLock<HashMap<String, Arc<Handle>>>,
    gateways: GatewayFactory,
    opts: ServerOptions,
}

impl AppState {
    pub fn new(gateways: GatewayFactory, opts: ServerOptions) -> Arc<Self> {
        Arc::new(Self { sessions: RwLock::new(HashMap::new()), gateways, opts })
    }

    async fn handle(&self, id: &str) -> Result<Arc<Handle>, SessionError> {
        self.sessions.read().await.get(id).cloned().ok_or_else(|| SessionError::NotFound(format!("session `{id}`")))
    }
}

impl IntoResponse for SessionError {
    fn into_response(self) -> Response {
        let status = match &self {
            SessionError::Scenario(_) => StatusCode::UNPROCESSABLE_ENTITY,
            SessionError::Phase(_) => StatusCode::CONFLICT,
            SessionError::BadRequest(_) => StatusCode::BAD_REQUEST,
            SessionError::NotFound(_) => StatusCode::NOT_FOUND,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let body = match &self {
            SessionError::Scenario(issues) => json!({"error": "invalid scenario", "issues": issues}),
            e => json!({"error": e.to_string()}),
        };
        (status, Json(body)).into_response()
    }
}

#[derive(Debug, Serialize)]
pub struct SessionSummary {
    pub id: String,
    pub name: String,
    pub phase: Phase,
    /// A command is being processed; `world` is the latest streamed snapshot.
    pub busy: bool,
    pub transcript_len: usize,
    pub ownership: OwnershipMap,
    pub world: Option<WorldView>,
}

fn summary(s: &Session) -> SessionSummary {
    SessionSummary {
        id: s.id.clone(),
        name: s.scenario.name.clone(),
        phase: s.phase,
        busy: false,
        transcript_len: s.transcript.len(),
        ownership: s.ctx.ownership.clone(),
        world: Some(WorldView::of(&s.world)),
    }
}

fn join_error(e: tokio::task::JoinError) -> SessionError {
    SessionError::Io(format!("worker task failed: {e}"))
}

async fn create_session(State(app): State<Arc<AppState>>, Json(scenario): Json<Scenario>) -> Result<Response, SessionError> {
    scenario.validate().map_err(SessionError::Scenario)?;
    let id = uuid::Uuid::new_v4().to_string();
    let telemetry = Telemetry::new(&id);
    let opts = SessionOptions {
        id: Some(id.clone()),
        observer: Some(telemetry.observer()),
        realtime: app.opts.realtime,
        tick_ms: app.opts.tick_ms,
        ..SessionOptions::default()
    };
    // blocking HTTP clients must be built off the async runtime
    let gateways = Arc::clone(&app.gateways);
    let session = tokio::task::spawn_blocking(move || {
        let gateway = gateways(&scenario)?;
        Session::create(scenario, gateway, opts)
    })
    .await
    .map_err(join_error)??;
    let body = summary(&session);
    let t = Arc::clone(&telemetry);
    let period = app.opts.heartbeat;
    let heartbeat = tokio::spawn(async move {
        let mut iv = tokio::time::interval(period);
        iv.tick().await;
        loop {
            iv.tick().await;
            t.heartbeat();
        }
    });
    let handle = Arc::new(Handle { session: Arc::new(Mutex::new(session)), telemetry, heartbeat });
    app.sessions.write().await.insert(id, handle);
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CommandBody {
    text: String,
}

async fn submit_command(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(body): Json<CommandBody>,
) -> Result<Response, SessionError> {
    let h = app.handle(&id).await?;
    // the lock queues overlapping commands in arrival order
    let mut guard = Arc::clone(&h.session).lock_owned().await;
    let res = tokio::task::spawn_blocking(move || guard.submit_command(&body.text)).await.map_err(join_error)??;
    Ok(Json(res).into_response())
}

async fn get_session(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, SessionError> {
    let h = app.handle(&id).await?;
    let body = match h.session.try_lock() {
        Ok(s) => summary(&s),
        Err(_) => SessionSummary {
            id: id.clone(),
            name: String::new(),
            phase: Phase::Running,
            busy: true,
            transcript_len: 0,
            ownership: OwnershipMap::new(),
            world: h.telemetry.last_view(),
        },
    };
    Ok(Json(body).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PosesBody {
    robots: BTreeMap<String, Pose>,
}

async fn push_poses(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(body): Json<PosesBody>,
) -> Result<Response, SessionError> {
    let h = app.handle(&id).await?;
    let mut s = h.session.lock().await;
    s.push_poses(&body.robots)?;
    Ok(Json(s.poses.poses(&s.world)).into_response())
}

async fn get_transcript(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, SessionError> {
    let h = app.handle(&id).await?;
    let text = h.session.lock().await.transcript.to_jsonl();
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], text).into_response())
}

async fn stream(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    ws: WebSocketUpgrade,
) -> Result<Response, SessionError> {
    let h = app.handle(&id).await?;
    let rx = h.telemetry.subscribe();
    Ok(ws.on_upgrade(move |socket| forward(socket, rx)))
}

async fn forward(mut socket: WebSocket, mut rx: broadcast::Receiver<Arc<str>>) {
    loop {
        match rx.recv().await {
            Ok(text) => {
                if socket.send(Message::Text(text.as_ref().into())).await.is_err() {
                    return;
                }
            }
            Err(broadcast::error::RecvError::Lagged(n)) => {
                tracing::warn!(skipped = n, "stream subscriber lagged");
            }
            Err(broadcast::error::RecvError::Closed) => return,
        }
    }
}

pub fn router(app: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/commands", post(submit_command))
        .route("/sessions/{id}/poses", post(push_poses))
        .route("/sessions/{id}/transcript", get(get_transcript))
        .route("/sessions/{id}/stream", get(stream))
        .with_state(app)
}

pub async fn serve(listener: tokio::net::TcpListener, app: Arc<AppState>) -> std::io::Result<()> {
    tracing::info!(addr = ?listener.local_addr().ok(), "serving");
    axum::serve(listener, router(app)).await
}
