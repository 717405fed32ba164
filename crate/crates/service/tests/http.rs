use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use futures::{SinkExt, StreamExt};
use hmt_core::orchestrator::{replay_episode, EpisodeRecord, PolicyRegistry, RunStore};
use hmt_core::sim::EpisodeConfig;
use hmt_service::protocol::Pacing;
use hmt_service::{AppState, ServiceConfig, WIRE_VERSION};
use serde_json::{json, Value};
use tokio::net::TcpListener;
use tokio_tungstenite::tungstenite::Message;
use tower::ServiceExt;

fn app(store: Option<&tempfile::TempDir>) -> Router {
    AppState::new(ServiceConfig {
        store: store.map(|d| RunStore::open(d.path()).unwrap()),
        default_config: EpisodeConfig { max_steps: 80, ..EpisodeConfig::reduced() },
        pacing: Pacing { steps_per_second: 200.0, decimation: 1 },
        ..ServiceConfig::default()
    })
    .router()
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = req.body(body.map_or(Body::empty(), |b| Body::from(b.to_string()))).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::String(String::from_utf8_lossy(&bytes).into())))
}

async fn create(app: &Router, body: Value) -> String {
    let (status, v) = call(app, "POST", "/sessions", Some(body)).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    assert_eq!(v["wire"], WIRE_VERSION);
    v["session_id"].as_str().unwrap().to_owned()
}

async fn control(app: &Router, id: &str, cmd: &str) -> (StatusCode, Value) {
    call(app, "POST", &format!("/sessions/{id}/control"), Some(json!({ "command": cmd }))).await
}

#[tokio::test]
async fn session_lifecycle_over_http() {
    let app = app(None);
    let id = create(&app, json!({})).await;
    let (status, info) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(info["status"], "configured");
    assert_eq!(info["wire"], WIRE_VERSION);

    assert_eq!(control(&app, &id, "resume").await.0, StatusCode::CONFLICT);
    let (status, v) = control(&app, &id, "start").await;
    assert_eq!((status, v["status"].as_str()), (StatusCode::OK, Some("running")));
    let (status, v) = control(&app, &id, "pause").await;
    assert_eq!((status, v["status"].as_str()), (StatusCode::OK, Some("paused")));
    let (_, v) = control(&app, &id, "step").await;
    let t = v["t"].as_u64().unwrap();
    let (_, v) = control(&app, &id, "step").await;
    assert_eq!(v["t"].as_u64(), Some(t + 1));
    let (status, v) = control(&app, &id, "abort").await;
    assert_eq!((status, v["status"].as_str()), (StatusCode::OK, Some("finished")));
    let (status, v) = control(&app, &id, "start").await;
    assert_eq!((status, v["code"].as_str()), (StatusCode::CONFLICT, Some("state")));
}

#[tokio::test]
async fn invalid_configs_get_field_diagnostics() {
    let app = app(None);
    let mut cfg = serde_json::to_value(EpisodeConfig::default()).unwrap();
    cfg["blue_count"] = json!(0);
    let (status, v) = call(&app, "POST", "/sessions", Some(json!({ "config": cfg }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["fields"][0]["field"], "config.blue_count");

    cfg["blue_count"] = json!("five");
    let (status, v) = call(&app, "POST", "/sessions", Some(json!({ "config": cfg }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["fields"][0]["field"], "config.blue_count");

    let (status, v) = call(&app, "POST", "/sessions", Some(json!({ "colour": "blue" }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["wire"], WIRE_VERSION);
}

#[tokio::test]
async fn commands_over_http() {
    let app = app(None);
    let id = create(&app, json!({})).await;
    let add = json!({ "type": "add_waypoint", "uav_id": 0, "pos": { "x": 10.0, "y": 20.0 } });
    let (status, _) = call(&app, "POST", &format!("/sessions/{id}/commands"), Some(add.clone())).await;
    assert_eq!(status, StatusCode::CONFLICT, "not started yet");
    control(&app, &id, "start").await;
    control(&app, &id, "pause").await;
    let (status, v) = call(&app, "POST", &format!("/sessions/{id}/commands"), Some(add)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["command_id"], 0);
    let red = json!({ "type": "clear_waypoints", "uav_id": 2 });
    let (status, v) = call(&app, "POST", &format!("/sessions/{id}/commands"), Some(red)).await;
    assert_eq!(status, StatusCode::FORBIDDEN);
    assert_eq!(v["detail"]["kind"], "unauthorized");
    let (status, v) = call(&app, "POST", "/sessions/nope/commands", Some(json!({ "type": "clear_waypoints", "uav_id": 0 }))).await;
    assert_eq!((status, v["code"].as_str()), (StatusCode::NOT_FOUND, Some("not_found")));
}

async fn wait_finished(app: &Router, id: &str) -> Value {
    for _ in 0..500 {
        let (_, v) = call(app, "GET", &format!("/sessions/{id}"), None).await;
        if v["status"] == "finished" {
            return v;
        }
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
    panic!("session {id} did not finish");
}

#[tokio::test]
async fn finished_episodes_are_listed_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(Some(&dir));
    let (status, v) = call(&app, "GET", "/episodes", None).await;
    assert_eq!((status, v["episodes"].as_array().map(Vec::len)), (StatusCode::OK, Some(0)));
    let id = create(&app, json!({ "seed": 12 })).await;
    control(&app, &id, "start").await;
    let info = wait_finished(&app, &id).await;
    assert_eq!(info["episode_id"], id.as_str());
    let (_, v) = call(&app, "GET", "/episodes", None).await;
    assert_eq!(v["episodes"][0]["id"], id.as_str());
    assert_eq!(v["episodes"][0]["seed"], 12);
    let (status, body) = call(&app, "GET", &format!("/episodes/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    let record = EpisodeRecord::from_ndjson(body.as_str().unwrap()).unwrap();
    replay_episode(&record, &PolicyRegistry::new()).unwrap();
    assert_eq!(call(&app, "GET", "/episodes/other", None).await.0, StatusCode::NOT_FOUND);
}

async fn spawn_server(state: AppState) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, state.router()).await });
    format!("127.0.0.1:{}", addr.port())
}

type Ws = tokio_tungstenite::WebSocketStream<tokio_tungstenite::MaybeTlsStream<tokio::net::TcpStream>>;

async fn connect(addr: &str, id: &str) -> Ws {
    tokio_tungstenite::connect_async(format!("ws://{addr}/sessions/{id}/stream")).await.unwrap().0
}

/// Next JSON message, or None once the server closes.
async fn next(ws: &mut Ws) -> Option<Value> {
    loop {
        match tokio::time::timeout(Duration::from_secs(10), ws.next()).await.expect("stream stalled")? {
            Ok(Message::Text(t)) => return Some(serde_json::from_str(t.as_str()).unwrap()),
            Ok(Message::Close(_)) | Err(_) => return None,
            Ok(_) => continue,
        }
    }
}

fn state(steps_per_second: f64) -> AppState {
    AppState::new(ServiceConfig {
        default_config: EpisodeConfig { max_steps: 60, ..EpisodeConfig::reduced() },
        pacing: Pacing { steps_per_second, decimation: 1 },
        ..ServiceConfig::default()
    })
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn concurrent_clients_see_identical_ordered_ticks() {
    let state = state(100.0);
    let id = state.create_session(Default::default()).unwrap();
    let addr = spawn_server(state.clone()).await;
    let (mut a, mut b) = (connect(&addr, &id).await, connect(&addr, &id).await);
    // both clients are subscribed before the first tick
    while state.info(&id).unwrap().clients < 2 {
        tokio::time::sleep(Duration::from_millis(5)).await;
    }
    state.control(&id, hmt_service::protocol::ControlCommand::Start).unwrap();
    let mut streams = Vec::new();
    for ws in [&mut a, &mut b] {
        let mut ticks = Vec::new();
        while let Some(msg) = next(ws).await {
            assert_eq!(msg["wire"], WIRE_VERSION);
            if msg["type"] == "tick" {
                ticks.push(msg["tick"].clone());
            }
        }
        streams.push(ticks);
    }
    assert_eq!(streams[0], streams[1]);
    let ts: Vec<u64> = streams[0].iter().map(|t| t["t"].as_u64().unwrap()).collect();
    assert!(ts.windows(2).all(|w| w[0] < w[1]), "{ts:?}");
    assert_eq!(ts[0], 0);
    let last = streams[0].last().unwrap();
    assert_eq!(last["final"], true);
    assert!(last["outcome"].is_object());
    assert_eq!(ts.len() as u64, last["t"].as_u64().unwrap() + 1);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn websocket_commands_are_acked_and_visible_at_their_step() {
    let state = state(20.0);
    let id = state.create_session(Default::default()).unwrap();
    let addr = spawn_server(state.clone()).await;
    state.control(&id, hmt_service::protocol::ControlCommand::Start).unwrap();
    let mut ws = connect(&addr, &id).await;
    let first = next(&mut ws).await.unwrap();
    assert_eq!(first["type"], "tick", "latest tick on connect");

    let cmd = json!({
        "type": "command", "wire": WIRE_VERSION, "client_ref": "c1",
        "command": { "type": "add_waypoint", "uav_id": 1, "pos": { "x": 0.0, "y": 0.0 } }
    });
    ws.send(Message::Text(cmd.to_string().into())).await.unwrap();
    let bad = json!({ "type": "command", "wire": "hmt-wire/0", "command": { "type": "clear_waypoints", "uav_id": 1 } });
    ws.send(Message::Text(bad.to_string().into())).await.unwrap();
    let red = json!({ "type": "command", "wire": WIRE_VERSION, "client_ref": "c2", "command": { "type": "clear_waypoints", "uav_id": 2 } });
    ws.send(Message::Text(red.to_string().into())).await.unwrap();

    let (mut ack, mut broadcast, mut seen_at, mut errors) = (None, None, None, Vec::new());
    while let Some(msg) = next(&mut ws).await {
        match msg["type"].as_str().unwrap() {
            "ack" => ack = Some(msg),
            "command" => broadcast = Some(msg),
            "error" => errors.push(msg),
            "tick" => {
                if seen_at.is_none() && msg["tick"]["commands"].as_array().unwrap().iter().any(|c| c == 0) {
                    seen_at = Some(msg["tick"].clone());
                }
            }
            other => panic!("unexpected message type {other}"),
        }
    }
    let ack = ack.expect("ack");
    assert_eq!(ack["client_ref"], "c1");
    assert_eq!(broadcast.unwrap()["applies_at"], ack["applies_at"]);
    let tick = seen_at.expect("the command shows up in a tick");
    assert_eq!(tick["step"], ack["applies_at"]);
    assert_eq!(tick["uavs"][1]["waypoints"][0], json!({ "x": 0.0, "y": 0.0 }));
    let codes: Vec<&str> = errors.iter().map(|e| e["code"].as_str().unwrap()).collect();
    assert_eq!(codes, ["wire_version", "unauthorized"]);
    assert_eq!(errors[1]["client_ref"], "c2");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn pause_halts_the_tick_stream() {
    let state = state(50.0);
    let id = state.create_session(Default::default()).unwrap();
    let addr = spawn_server(state.clone()).await;
    let mut ws = connect(&addr, &id).await;
    while state.info(&id).unwrap().clients < 1 {
        tokio::time::sleep(Duration::from_millis(5)).await;
    }
    use hmt_service::protocol::ControlCommand::*;
    state.control(&id, Start).unwrap();
    for _ in 0..3 {
        next(&mut ws).await.unwrap();
    }
    let paused_at = state.control(&id, Pause).unwrap().t;
    // drain whatever was sent before the pause took effect
    let mut last = 0;
    while let Ok(Some(msg)) = tokio::time::timeout(Duration::from_millis(300), next(&mut ws)).await {
        last = msg["tick"]["t"].as_u64().unwrap();
    }
    assert!(last <= paused_at);
    assert!(tokio::time::timeout(Duration::from_millis(300), next(&mut ws)).await.is_err(), "tick while paused");
    state.control(&id, Resume).unwrap();
    let msg = next(&mut ws).await.unwrap();
    assert_eq!(msg["tick"]["t"].as_u64(), Some(paused_at + 1));
    state.control(&id, Abort).unwrap();
    let mut codes = Vec::new();
    while let Some(msg) = next(&mut ws).await {
        if msg["type"] == "error" {
            codes.push(msg["code"].as_str().unwrap().to_owned());
        }
    }
    assert_eq!(codes, ["aborted"]);
}
