//! JSON HTTP service over an [`Engine`].

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use geoagent_core::llm::parse_script;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::engine::{Engine, EngineError};
use crate::session::{Mode, SessionError};

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CreateSession {
    pub mode: Option<Mode>,
    /// Replay script in JSONL form; only accepted by a replay-backed engine.
    pub replay: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
    pub mode: Mode,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Deserialize)]
pub struct QueryBody {
    pub text: String,
}

/// Error body: `{"error": {"kind", "message", "session_id"?, "trajectory_id"?}}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
    session_id: Option<String>,
    trajectory_id: Option<String>,
}

impl ApiError {
    fn new(status: StatusCode, kind: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            kind,
            message: message.into(),
            session_id: None,
            trajectory_id: None,
        }
    }

    fn validation(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "validation", message)
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let (status, kind) = match &e {
            SessionError::UnknownSession(_)
            | SessionError::UnknownResult(_)
            | SessionError::UnknownArtifact(_)
            | SessionError::UnknownTrajectory(_) => (StatusCode::NOT_FOUND, "not_found"),
            SessionError::Denied(_) => (StatusCode::FORBIDDEN, "denied"),
            SessionError::Io { .. } | SessionError::Corrupt { .. } => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        Self::new(status, kind, e.to_string())
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Validation(m) => Self::validation(m),
            EngineError::Session(s) => s.into(),
            EngineError::Backend {
                message,
                session_id,
                trajectory_id,
            } => Self {
                status: StatusCode::SERVICE_UNAVAILABLE,
                kind: "backend_unavailable",
                message: format!("language model backend unavailable: {message}"),
                session_id: Some(session_id),
                trajectory_id,
            },
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut error = json!({ "kind": self.kind, "message": self.message });
        if let Some(s) = self.session_id {
            error["session_id"] = json!(s);
        }
        if let Some(t) = self.trajectory_id {
            error["trajectory_id"] = json!(t);
        }
        (self.status, Json(json!({ "error": error }))).into_response()
    }
}

type Shared = Arc<Engine>;

/// Run blocking engine work off the async executor.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

fn parse_json<T: for<'de> Deserialize<'de> + Default>(body: &[u8]) -> Result<T, ApiError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(body).map_err(|e| ApiError::validation(format!("invalid JSON body: {e}")))
}

async fn healthz() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

async fn create_session(State(engine): State<Shared>, body: Bytes) -> Result<(StatusCode, Json<SessionCreated>), ApiError> {
    let req: CreateSession = parse_json(&body)?;
    let script = match req.replay {
        Some(text) => {
            if engine.replay.is_none() {
                return Err(ApiError::validation("this server does not accept replay scripts"));
            }
            Some(parse_script(&text).map_err(|e| ApiError::validation(e.to_string()))?)
        }
        None => None,
    };
    let mode = req.mode.unwrap_or_default();
    blocking(move || {
        let session = engine.create_session(mode)?;
        if let (Some(replay), Some(entries)) = (&engine.replay, script) {
            replay.load(session.id(), entries);
        }
        Ok((
            StatusCode::CREATED,
            Json(SessionCreated {
                session_id: session.id().into(),
                mode,
                created_at: session.info().created_at,
            }),
        ))
    })
    .await
}

async fn query(State(engine): State<Shared>, Path(id): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    let req: QueryBody = serde_json::from_slice(&body).map_err(|e| ApiError::validation(format!("invalid JSON body: {e}")))?;
    blocking(move || Ok(Json(engine.handle_query(&id, &req.text)?).into_response())).await
}

async fn artifact(State(engine): State<Shared>, Path((id, aid)): Path<(String, String)>) -> Result<Response, ApiError> {
    blocking(move || {
        let (bytes, media_type) = engine.sessions.artifact(&id, &aid)?;
        Ok(([(header::CONTENT_TYPE, media_type)], bytes).into_response())
    })
    .await
}

async fn trajectory(State(engine): State<Shared>, Path((id, tid)): Path<(String, String)>) -> Result<Response, ApiError> {
    blocking(move || {
        let bytes = engine.sessions.trajectory(&id, &tid)?;
        Ok(([(header::CONTENT_TYPE, "application/json")], bytes).into_response())
    })
    .await
}

pub fn router(engine: Shared) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/query", post(query))
        .route("/sessions/{id}/artifacts/{aid}", get(artifact))
        .route("/sessions/{id}/trajectory/{tid}", get(trajectory))
        .with_state(engine)
}

pub async fn serve(engine: Shared, listener: tokio::net::TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router(engine))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
