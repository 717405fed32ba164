use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard, RwLock};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::{SinkExt, StreamExt};
use hmt_core::agents::{CommandError, OperatorCommand};
use hmt_core::learner::DuelingQNet;
use hmt_core::orchestrator::{OrchestratorError, PolicyRegistry, RunStore};
use hmt_core::sim::{EpisodeConfig, FieldError};
use serde::de::DeserializeOwned;
use serde::Serialize;
use tokio::sync::{broadcast, Notify};
use tower_http::services::ServeDir;

use crate::protocol::*;
use crate::session::{Emitted, EpisodeEnd, Session, SessionError, SessionSpec};

/// Server-wide settings.
#[derive(Default)]
pub struct ServiceConfig {
    pub store: Option<RunStore>,
    pub policies: PolicyRegistry,
    /// Policy bound under the waypoint follower when a request names
    /// neither bindings nor a policy.
    pub default_policy: Option<String>,
    /// Scenario used when a session request omits `config`.
    pub default_config: EpisodeConfig,
    pub pacing: Pacing,
    /// Served at `/` when set.
    pub static_dir: Option<PathBuf>,
}

/// An encoded server message plus what the stream loop needs to know
/// about it without decoding.
#[derive(Clone)]
struct Outbound {
    text: Arc<str>,
    tick_t: Option<u64>,
    closes: bool,
}

impl Outbound {
    fn message(msg: ServerMessage) -> Self {
        let (tick_t, closes) = match &msg {
            ServerMessage::Tick { tick } => (Some(tick.t), tick.is_final),
            _ => (None, false),
        };
        Self { text: encode(msg), tick_t, closes }
    }
}

struct Handle {
    session: Mutex<Session>,
    tx: broadcast::Sender<Outbound>,
    wake: Notify,
}

impl Handle {
    fn lock(&self) -> MutexGuard<'_, Session> {
        self.session.lock().unwrap_or_else(|e| e.into_inner())
    }
}

struct Inner {
    cfg: ServiceConfig,
    /// Starts as `cfg.policies`; grows through [`AppState::publish_policy`].
    policies: RwLock<(PolicyRegistry, Option<String>)>,
    sessions: Mutex<HashMap<String, Arc<Handle>>>,
    next_id: AtomicU64,
    epoch: u64,
}

/// Shared service state; cheap to clone.
#[derive(Clone)]
pub struct AppState(Arc<Inner>);

fn encode<T: Serialize>(msg: T) -> Arc<str> {
    serde_json::to_string(&Versioned::new(msg)).expect("wire types serialize").into()
}

impl AppState {
    pub fn new(cfg: ServiceConfig) -> Self {
        let epoch = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let policies = RwLock::new((cfg.policies.clone(), cfg.default_policy.clone()));
        Self(Arc::new(Inner { cfg, policies, sessions: Mutex::new(HashMap::new()), next_id: AtomicU64::new(1), epoch }))
    }

    /// Registers `net` under `id` for sessions created from now on, and
    /// optionally makes it the default policy.
    pub fn publish_policy(&self, id: &str, net: Arc<DuelingQNet>, make_default: bool) {
        let mut p = self.0.policies.write().unwrap_or_else(|e| e.into_inner());
        p.0.insert(id.to_owned(), net);
        if make_default {
            p.1 = Some(id.to_owned());
        }
    }

    pub fn store(&self) -> Option<&RunStore> {
        self.0.cfg.store.as_ref()
    }

    fn sessions(&self) -> MutexGuard<'_, HashMap<String, Arc<Handle>>> {
        self.0.sessions.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn handle(&self, id: &str) -> Result<Arc<Handle>, SessionError> {
        self.sessions().get(id).cloned().ok_or_else(|| SessionError::NotFound(id.to_owned()))
    }

    pub fn create_session(&self, mut req: SessionRequest) -> Result<String, SessionError> {
        let (policies, default_policy) = self.0.policies.read().unwrap_or_else(|e| e.into_inner()).clone();
        if req.bindings.is_none() {
            req.policy = req.policy.or(default_policy);
        }
        let spec = SessionSpec::resolve(req, &self.0.cfg.default_config, self.0.cfg.pacing)?;
        let n = self.0.next_id.fetch_add(1, Ordering::Relaxed);
        let id = format!("s{:x}-{n}", self.0.epoch);
        let session = Session::new(id.clone(), spec, &policies)?;
        let (tx, _) = broadcast::channel(1024);
        let handle = Arc::new(Handle { session: Mutex::new(session), tx, wake: Notify::new() });
        self.sessions().insert(id.clone(), handle);
        Ok(id)
    }

    pub fn info(&self, id: &str) -> Result<SessionInfo, SessionError> {
        let h = self.handle(id)?;
        let clients = h.tx.receiver_count();
        let info = h.lock().info(clients);
        Ok(info)
    }

    pub fn control(&self, id: &str, cmd: ControlCommand) -> Result<ControlResponse, SessionError> {
        let h = self.handle(id)?;
        let resp = {
            let mut s = h.lock();
            let emitted = s.control(cmd)?;
            self.publish(&h, &mut s, emitted);
            ControlResponse { status: s.status(), t: s.t() }
        };
        match cmd {
            ControlCommand::Start => {
                let period = Duration::from_secs_f64(1.0 / h.lock().spec().pacing.steps_per_second);
                tokio::spawn(pace(self.clone(), h.clone(), period));
            }
            ControlCommand::Resume | ControlCommand::Abort => h.wake.notify_one(),
            _ => {}
        }
        Ok(resp)
    }

    pub fn submit(&self, id: &str, cmd: OperatorCommand) -> Result<Ack, SessionError> {
        let h = self.handle(id)?;
        let s = &mut h.lock();
        let ack = s.submit(cmd)?;
        let msg = ServerMessage::Command { command_id: ack.command_id, applies_at: ack.applies_at, command: cmd };
        let _ = h.tx.send(Outbound::message(msg));
        Ok(ack)
    }

    /// Sends emitted ticks while the session lock is held, so ticks from
    /// the pacing task and from manual steps cannot interleave out of
    /// order, then persists a finished episode.
    fn publish(&self, h: &Handle, s: &mut Session, emitted: Emitted) {
        for tick in emitted.ticks {
            let _ = h.tx.send(Outbound::message(ServerMessage::Tick { tick }));
        }
        if emitted.aborted {
            let error = ErrorBody { code: "aborted".into(), message: format!("session aborted at t={}", s.t()), fields: Vec::new(), detail: None };
            let _ = h.tx.send(Outbound { closes: true, ..Outbound::message(ServerMessage::Error { client_ref: None, error }) });
        }
        let Some(finished) = emitted.finished else { return };
        let Some(store) = &self.0.cfg.store else { return };
        let id = s.id().to_owned();
        let saved = match finished {
            EpisodeEnd::Complete(record) => store.save(&id, &record).map(|_| Some(id)),
            EpisodeEnd::Aborted(partial) => store.save_partial(&id, &partial.0, &partial.1).map(|_| None),
        };
        match saved {
            Ok(episode) => s.episode_id = episode,
            Err(e) => tracing::error!(session = %s.id(), error = %e, "could not save episode"),
        }
    }

    pub fn router(&self) -> Router {
        let api = Router::new()
            .route("/sessions", post(create))
            .route("/sessions/{id}", get(info))
            .route("/sessions/{id}/control", post(control))
            .route("/sessions/{id}/commands", post(command))
            .route("/sessions/{id}/stream", get(stream))
            .route("/episodes", get(episodes))
            .route("/episodes/{id}", get(episode))
            .with_state(self.clone());
        match &self.0.cfg.static_dir {
            Some(dir) => api.fallback_service(ServeDir::new(dir)),
            None => api,
        }
    }
}

async fn pace(app: AppState, h: Arc<Handle>, period: Duration) {
    let mut interval = tokio::time::interval(period);
    interval.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
    loop {
        interval.tick().await;
        let status = {
            let mut s = h.lock();
            match s.advance() {
                Ok(emitted) => app.publish(&h, &mut s, emitted),
                Err(e) => {
                    tracing::error!(session = %s.id(), error = %e, "step failed");
                    return;
                }
            }
            s.status()
        };
        match status {
            SessionStatus::Finished => return,
            SessionStatus::Paused => {
                h.wake.notified().await;
                interval.reset();
            }
            _ => {}
        }
    }
}

/// JSON error response with the wire version.
pub struct ApiError(StatusCode, ErrorBody);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(Versioned::new(self.1))).into_response()
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let (status, code) = match &e {
            SessionError::NotFound(_) | SessionError::EpisodeNotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            SessionError::State { .. } => (StatusCode::CONFLICT, "state"),
            SessionError::Invalid(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid"),
            SessionError::Command(CommandError::Unauthorized { .. }) => (StatusCode::FORBIDDEN, "unauthorized"),
            SessionError::Command(_) => (StatusCode::UNPROCESSABLE_ENTITY, "command_rejected"),
            SessionError::NoStore => (StatusCode::NOT_FOUND, "no_store"),
            SessionError::Orchestrator(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        ApiError(status, error_body(code, &e))
    }
}

fn error_body(code: &str, e: &SessionError) -> ErrorBody {
    ErrorBody {
        code: code.into(),
        message: e.to_string(),
        fields: match e {
            SessionError::Invalid(f) => f.clone(),
            _ => Vec::new(),
        },
        detail: match e {
            SessionError::Command(c) => serde_json::to_value(c).ok(),
            _ => None,
        },
    }
}

/// Parses a JSON body, reporting the path of the offending field.
fn parse<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    let de = &mut serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let reason = e.inner().to_string();
        let message = format!("malformed request: {reason}");
        ApiError(
            StatusCode::UNPROCESSABLE_ENTITY,
            ErrorBody { code: "invalid".into(), message, fields: vec![FieldError { field, reason }], detail: None },
        )
    })
}

type ApiResult<T> = Result<(StatusCode, Json<Versioned<T>>), ApiError>;

fn ok<T>(status: StatusCode, body: T) -> ApiResult<T> {
    Ok((status, Json(Versioned::new(body))))
}

async fn create(State(app): State<AppState>, body: Bytes) -> ApiResult<SessionCreated> {
    let req: SessionRequest = if body.iter().all(u8::is_ascii_whitespace) { SessionRequest::default() } else { parse(&body)? };
    let session_id = app.create_session(req)?;
    ok(StatusCode::CREATED, SessionCreated { session_id, status: SessionStatus::Configured })
}

async fn info(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<SessionInfo> {
    ok(StatusCode::OK, app.info(&id)?)
}

async fn control(State(app): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<ControlResponse> {
    let req: ControlRequest = parse(&body)?;
    ok(StatusCode::OK, app.control(&id, req.command)?)
}

async fn command(State(app): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Ack> {
    let cmd: OperatorCommand = parse(&body)?;
    ok(StatusCode::OK, app.submit(&id, cmd)?)
}

#[derive(Serialize)]
struct EpisodeList {
    episodes: Vec<hmt_core::orchestrator::IndexEntry>,
}

fn store(app: &AppState) -> Result<&RunStore, ApiError> {
    app.0.cfg.store.as_ref().ok_or_else(|| SessionError::NoStore.into())
}

fn internal(e: OrchestratorError) -> ApiError {
    SessionError::Orchestrator(e).into()
}

async fn episodes(State(app): State<AppState>) -> ApiResult<EpisodeList> {
    let episodes = store(&app)?.list().map_err(internal)?;
    ok(StatusCode::OK, EpisodeList { episodes })
}

/// The stored NDJSON record, verbatim.
async fn episode(State(app): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let store = store(&app)?;
    if !store.list().map_err(internal)?.iter().any(|e| e.id == id) {
        return Err(SessionError::EpisodeNotFound(id).into());
    }
    let text = std::fs::read_to_string(store.dir().join(format!("{id}.ndjson")))
        .map_err(|e| internal(OrchestratorError::Io(e.to_string())))?;
    Ok(([(axum::http::header::CONTENT_TYPE, "application/x-ndjson")], text).into_response())
}

async fn stream(State(app): State<AppState>, Path(id): Path<String>, ws: WebSocketUpgrade) -> Result<Response, ApiError> {
    let h = app.handle(&id)?;
    Ok(ws.on_upgrade(move |socket| client(app, id, h, socket)))
}

/// Sends the latest tick, then every broadcast message, and accepts
/// commands from the client. Closes after the final tick.
async fn client(app: AppState, id: String, h: Arc<Handle>, socket: WebSocket) {
    let (mut sink, mut incoming) = socket.split();
    let (mut rx, latest, finished) = {
        let s = h.lock();
        (h.tx.subscribe(), s.latest_tick().cloned(), s.status() == SessionStatus::Finished)
    };
    let mut last_t = latest.as_ref().map(|t| t.t);
    if let Some(tick) = latest {
        if sink.send(text(&Outbound::message(ServerMessage::Tick { tick }))).await.is_err() {
            return;
        }
    }
    if finished {
        let _ = sink.close().await;
        return;
    }
    let (reply_tx, mut replies) = tokio::sync::mpsc::unbounded_channel::<Outbound>();
    let reader = tokio::spawn(async move {
        while let Some(Ok(msg)) = incoming.next().await {
            let raw = match msg {
                Message::Text(t) => t,
                Message::Close(_) => break,
                _ => continue,
            };
            let reply = match parse_client(raw.as_str()) {
                Ok(Versioned { body: ClientMessage::Command { client_ref, command }, .. }) => match app.submit(&id, command) {
                    Ok(ack) => ServerMessage::Ack { client_ref, ack },
                    Err(e) => {
                        let ApiError(_, error) = e.into();
                        ServerMessage::Error { client_ref, error }
                    }
                },
                Err(error) => ServerMessage::Error { client_ref: None, error },
            };
            if reply_tx.send(Outbound::message(reply)).is_err() {
                break;
            }
        }
    });
    loop {
        let out = tokio::select! {
            msg = rx.recv() => match msg {
                Ok(out) => out,
                // slow client: skip ahead, no backfill
                Err(broadcast::error::RecvError::Lagged(_)) => continue,
                Err(broadcast::error::RecvError::Closed) => break,
            },
            Some(reply) = replies.recv() => reply,
        };
        if let Some(t) = out.tick_t {
            // the tick sent on connect may also be in the broadcast queue
            if last_t.is_some_and(|l| t <= l) {
                continue;
            }
            last_t = Some(t);
        }
        if sink.send(text(&out)).await.is_err() || out.closes {
            break;
        }
    }
    while let Ok(reply) = replies.try_recv() {
        let _ = sink.send(text(&reply)).await;
    }
    let _ = sink.close().await;
    reader.abort();
}

fn text(out: &Outbound) -> Message {
    Message::Text(out.text.as_ref().into())
}

fn parse_client(text: &str) -> Result<Versioned<ClientMessage>, ErrorBody> {
    let msg: Versioned<ClientMessage> = match parse(text.as_bytes()) {
        Ok(m) => m,
        Err(ApiError(_, body)) => return Err(body),
    };
    if msg.wire != WIRE_VERSION {
        return Err(ErrorBody {
            code: "wire_version".into(),
            message: format!("unsupported wire version {:?}, expected {WIRE_VERSION}", msg.wire),
            fields: Vec::new(),
            detail: None,
        });
    }
    Ok(msg)
}
