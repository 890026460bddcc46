//! Wires the store, gateway, knowledge and sessions into the two pipelines.

use std::sync::Arc;

use geoagent_core::agent::{
    run_agent, run_naive, AgentConfig, AgentEnv, AgentOutcome, ArtifactKind, ArtifactRecord, ExecutionOutcome,
    NaiveOutcome, RowsPage, StopReason,
};
use geoagent_core::knowledge::KnowledgeBase;
use geoagent_core::llm::{LlmError, Role};
use geoagent_core::sql::LintConfig;
use geoagent_core::{SchemaSnapshot, Value};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{Gateway, ReplayBackend};
use crate::session::{Mode, Session, SessionError, Sessions};
use crate::store::Store;

pub struct Engine {
    pub store: Store,
    pub gateway: Arc<Gateway>,
    pub knowledge: KnowledgeBase,
    pub lint: LintConfig,
    pub agent: AgentConfig,
    pub sessions: Sessions,
    /// Set when the backends replay scripts rather than call live endpoints.
    pub replay: Option<Arc<ReplayBackend>>,
}

/// [`AgentEnv`] bound to one session.
pub struct SessionEnv<'a> {
    engine: &'a Engine,
    session: &'a Session,
    /// The last gateway failure seen during the run.
    pub gateway_error: Option<LlmError>,
    /// Every statement handed to the store, in order.
    pub executed: Vec<String>,
}

impl<'a> SessionEnv<'a> {
    pub fn new(engine: &'a Engine, session: &'a Session) -> Self {
        Self {
            engine,
            session,
            gateway_error: None,
            executed: Vec::new(),
        }
    }
}

impl AgentEnv for SessionEnv<'_> {
    fn complete(&mut self, role: Role, prompt: &str) -> Result<String, LlmError> {
        let gw = &self.engine.gateway;
        let result = gw.complete(&gw.request(role, prompt, self.session.id()));
        if let Err(e) = &result {
            self.gateway_error = Some(e.clone());
        }
        result
    }

    fn schema(&mut self, table: Option<&str>) -> Result<SchemaSnapshot, String> {
        self.engine.store.schema(table).map_err(|e| e.to_string())
    }

    fn execute(&mut self, sql: &str) -> Result<ExecutionOutcome, String> {
        self.executed.push(sql.into());
        let table = self.engine.store.query(sql).map_err(|e| e.to_string())?;
        self.session.save_result(sql, &table).map_err(|e| e.to_string())
    }

    fn read_page(&mut self, result_id: &str, offset: usize, limit: usize) -> Result<RowsPage, String> {
        self.session.read_page(result_id, offset, limit).map_err(|e| e.to_string())
    }

    fn distinct_labels(&mut self, table: &str) -> Result<Vec<String>, String> {
        self.engine.store.distinct_labels(table).map_err(|e| e.to_string())
    }

    fn save_artifact(
        &mut self,
        kind: ArtifactKind,
        title: &str,
        source_result_id: Option<&str>,
        body: &str,
    ) -> Result<ArtifactRecord, String> {
        self.session
            .save_artifact(kind, title, source_result_id, body.as_bytes())
            .map_err(|e| e.to_string())
    }

    fn knowledge(&self) -> &KnowledgeBase {
        &self.engine.knowledge
    }

    fn lint_config(&self) -> &LintConfig {
        &self.engine.lint
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactDescriptor {
    pub id: String,
    pub kind: ArtifactKind,
    pub title: String,
    pub url: String,
    pub media_type: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResponse {
    pub session_id: String,
    pub mode: Mode,
    pub question: String,
    pub answer: String,
    pub succeeded: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stop_reason: Option<StopReason>,
    pub artifacts: Vec<ArtifactDescriptor>,
    pub trajectory_id: String,
    pub trajectory_url: String,
    pub sql_gen_calls: u64,
    pub planner_calls: u64,
    /// Naive mode: the generated statement.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sql: Option<String>,
    /// Naive mode: the raw generation or execution error.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// What one query produced, before it is turned into a response.
#[derive(Debug, Clone)]
pub enum RunOutcome {
    Agentic(AgentOutcome),
    Naive(NaiveOutcome),
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error("language model backend unavailable: {message}")]
    Backend {
        message: String,
        session_id: String,
        trajectory_id: Option<String>,
    },
}

pub fn artifact_url(session: &str, id: &str) -> String {
    format!("/sessions/{session}/artifacts/{id}")
}

pub fn trajectory_url(session: &str, id: &str) -> String {
    format!("/sessions/{session}/trajectory/{id}")
}

fn descriptor(session: &str, a: &ArtifactRecord) -> ArtifactDescriptor {
    ArtifactDescriptor {
        id: a.id.clone(),
        kind: a.kind,
        title: a.title.clone(),
        url: artifact_url(session, &a.id),
        media_type: a.kind.media_type().into(),
    }
}

/// Plain-text rendering of a naive result for the answer field.
pub fn render_naive_answer(outcome: &NaiveOutcome) -> String {
    match &outcome.execution {
        Err(e) => format!("Error: {e}"),
        Ok(ex) => {
            let mut out = format!("{} row(s)", ex.row_count);
            if !ex.columns.is_empty() {
                out.push_str(&format!("\n{}", ex.columns.join(" | ")));
            }
            for row in &ex.preview {
                let cells: Vec<String> = row.iter().map(Value::to_field).collect();
                out.push_str(&format!("\n{}", cells.join(" | ")));
            }
            if ex.row_count > ex.preview.len() {
                out.push_str(&format!("\n... full result in {}", ex.result_id));
            }
            out
        }
    }
}

impl Engine {
    pub fn create_session(&self, mode: Mode) -> Result<Arc<Session>, EngineError> {
        let s = self.sessions.create(mode)?;
        self.gateway.open_session(s.id());
        Ok(s)
    }

    /// Run one question in the session's mode and persist its trajectory.
    pub fn run(&self, session: &Session, text: &str) -> Result<(RunOutcome, String, Option<LlmError>), EngineError> {
        if text.trim().is_empty() {
            return Err(EngineError::Validation("query text must not be empty".into()));
        }
        let _guard = session.lock_run();
        self.gateway.begin_question(session.id(), text);
        let mut env = SessionEnv::new(self, session);
        let outcome = match session.mode() {
            Mode::Agentic => RunOutcome::Agentic(run_agent(&mut env, text, &self.agent)),
            Mode::Naive => RunOutcome::Naive(run_naive(&mut env, text)),
        };
        let trajectory_id = match &outcome {
            RunOutcome::Agentic(o) => session.save_trajectory(o)?,
            RunOutcome::Naive(o) => session.save_trajectory(o)?,
        };
        Ok((outcome, trajectory_id, env.gateway_error))
    }

    pub fn handle_query(&self, session_id: &str, text: &str) -> Result<QueryResponse, EngineError> {
        let session = self.sessions.get(session_id)?;
        let (outcome, trajectory_id, gateway_error) = self.run(&session, text)?;
        let unavailable = match &outcome {
            RunOutcome::Agentic(o) => o.stop_reason == StopReason::GatewayError,
            RunOutcome::Naive(o) => o.sql.is_empty() && gateway_error.is_some(),
        };
        if unavailable {
            let message = gateway_error.map_or_else(|| "backend call failed".to_string(), |e| e.to_string());
            return Err(EngineError::Backend {
                message,
                session_id: session_id.into(),
                trajectory_id: Some(trajectory_id),
            });
        }
        let sid = session.id();
        let response = match outcome {
            RunOutcome::Agentic(o) => QueryResponse {
                session_id: sid.into(),
                mode: Mode::Agentic,
                question: o.question,
                answer: o.answer,
                succeeded: o.succeeded,
                stop_reason: Some(o.stop_reason),
                artifacts: o.artifacts.iter().map(|a| descriptor(sid, a)).collect(),
                trajectory_url: trajectory_url(sid, &trajectory_id),
                trajectory_id,
                sql_gen_calls: o.sql_gen_calls,
                planner_calls: o.planner_calls,
                sql: None,
                error: None,
            },
            RunOutcome::Naive(o) => {
                let artifacts = match &o.execution {
                    Ok(ex) => session
                        .artifact_record(&ex.result_id)
                        .map(|a| vec![descriptor(sid, &a)])
                        .unwrap_or_default(),
                    Err(_) => Vec::new(),
                };
                QueryResponse {
                    session_id: sid.into(),
                    mode: Mode::Naive,
                    answer: render_naive_answer(&o),
                    succeeded: o.execution.is_ok(),
                    stop_reason: None,
                    artifacts,
                    trajectory_url: trajectory_url(sid, &trajectory_id),
                    trajectory_id,
                    sql_gen_calls: o.sql_gen_calls,
                    planner_calls: 0,
                    error: o.execution.as_ref().err().cloned(),
                    sql: Some(o.sql),
                    question: o.question,
                }
            }
        };
        Ok(response)
    }
}
