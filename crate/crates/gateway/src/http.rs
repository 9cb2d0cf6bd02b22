//! Axum routes over [`SessionService`].
//!
//! Turns run on the blocking pool; their events are forwarded through a
//! channel and written to the response body as they happen.

use std::convert::Infallible;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Body;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};
use teleop_core::agent::{AgentEvent, Decision};
use tokio::sync::mpsc;

use crate::service::{CreateSession, SessionService, TurnPermit};
use crate::GatewayError;

const NDJSON: &str = "application/x-ndjson";

impl IntoResponse for GatewayError {
    fn into_response(self) -> Response {
        let status = match &self {
            Self::UnknownSession(_) => StatusCode::NOT_FOUND,
            Self::UnknownScenario(_) | Self::InvalidConfig(_) | Self::Scenario(_) => StatusCode::BAD_REQUEST,
            Self::SessionBusy(_) | Self::NoPendingConfirmation(_) => StatusCode::CONFLICT,
            Self::Tool(_) => StatusCode::UNPROCESSABLE_ENTITY,
            Self::Agent(_) => StatusCode::BAD_GATEWAY,
            Self::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(json!({"error": self.to_string(), "code": self.code()}))).into_response()
    }
}

type Shared = State<Arc<SessionService>>;

pub fn router(service: Arc<SessionService>) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(status))
        .route("/sessions/{id}/messages", post(message))
        .route("/sessions/{id}/confirm", post(confirm))
        .route("/sessions/{id}/estop", post(estop))
        .route("/sessions/{id}/reset", post(reset))
        .route("/sessions/{id}/override", post(override_))
        .route("/sessions/{id}/transcript", get(transcript))
        .route("/sessions/{id}/metrics", get(metrics))
        .with_state(service)
}

pub async fn serve(service: Arc<SessionService>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(service)).await
}

async fn create(State(svc): Shared, Json(req): Json<CreateSession>) -> Result<impl IntoResponse, GatewayError> {
    let id = svc.create_session(&req)?;
    Ok((StatusCode::CREATED, Json(json!({ "id": id }))))
}

async fn status(State(svc): Shared, Path(id): Path<String>) -> Result<impl IntoResponse, GatewayError> {
    Ok(Json(svc.status(&id)?))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PostMessage {
    text: String,
    #[serde(default)]
    language: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Confirm {
    decision: Decision,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Override {
    tool: String,
    #[serde(default = "empty_args")]
    args: Value,
}

fn empty_args() -> Value {
    json!({})
}

/// Run `turn` on the blocking pool and stream what it emits.
fn stream_turn(
    permit: TurnPermit,
    turn: impl FnOnce(TurnPermit, &mut dyn FnMut(&AgentEvent)) + Send + 'static,
) -> Response {
    let (tx, rx) = mpsc::unbounded_channel::<String>();
    tokio::task::spawn_blocking(move || {
        let mut emit = |e: &AgentEvent| {
            let mut line = serde_json::to_string(e).expect("events serialize");
            line.push('\n');
            // The client may have gone away; the turn still runs to the end.
            let _ = tx.send(line);
        };
        turn(permit, &mut emit);
    });
    let body = futures::stream::unfold(rx, |mut rx| async move {
        rx.recv().await.map(|line| (Ok::<_, Infallible>(line), rx))
    });
    ([(header::CONTENT_TYPE, NDJSON)], Body::from_stream(body)).into_response()
}

async fn message(
    State(svc): Shared,
    Path(id): Path<String>,
    Json(req): Json<PostMessage>,
) -> Result<Response, GatewayError> {
    let permit = svc.begin_turn(&id)?;
    Ok(stream_turn(permit, move |p, emit| {
        // Errors were already streamed as an error event.
        let _ = p.message(&req.text, req.language.as_deref(), emit);
    }))
}

async fn confirm(
    State(svc): Shared,
    Path(id): Path<String>,
    Json(req): Json<Confirm>,
) -> Result<Response, GatewayError> {
    if svc.status(&id)?.pending.is_none() {
        return Err(GatewayError::NoPendingConfirmation(id));
    }
    let permit = svc.begin_turn(&id)?;
    Ok(stream_turn(permit, move |p, emit| {
        let _ = p.confirm(req.decision, emit);
    }))
}

async fn estop(State(svc): Shared, Path(id): Path<String>) -> Result<impl IntoResponse, GatewayError> {
    let ack = svc.estop(&id)?;
    Ok(Json(json!({ "ack_tick": ack })))
}

async fn reset(State(svc): Shared, Path(id): Path<String>) -> Result<impl IntoResponse, GatewayError> {
    svc.reset_estop(&id)?;
    Ok(Json(json!({ "estopped": false })))
}

async fn override_(
    State(svc): Shared,
    Path(id): Path<String>,
    Json(req): Json<Override>,
) -> Result<impl IntoResponse, GatewayError> {
    let reply = tokio::task::spawn_blocking(move || svc.human_override(&id, &req.tool, &req.args))
        .await
        .expect("override task")?;
    Ok(Json(reply))
}

async fn transcript(State(svc): Shared, Path(id): Path<String>) -> Result<impl IntoResponse, GatewayError> {
    Ok(([(header::CONTENT_TYPE, NDJSON)], svc.transcript(&id)?))
}

async fn metrics(State(svc): Shared, Path(id): Path<String>) -> Result<impl IntoResponse, GatewayError> {
    let m = svc.metrics(&id)?;
    let mut v = serde_json::to_value(m).expect("metrics serialize");
    v["mtbhi"] = json!(m.mtbhi());
    Ok(Json(v))
}
