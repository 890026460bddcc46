//! Completion backends behind one accounting gateway.

use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use geoagent_core::llm::{
    parse_script, prompt_hash, CompletionRequest, LlmError, MatchMode, Matcher, ReplayCursor, ReplayEntry,
    ReplayWarning, Role, UsageLedger, UsageReport, DEFAULT_MAX_TOKENS,
};
use serde::Deserialize;
use serde_json::json;

pub trait Backend: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError>;
}

/// Stand-in for a role with no configured backend.
pub struct Unconfigured;

impl Backend for Unconfigured {
    fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        Err(LlmError::Unconfigured(request.role))
    }
}

pub const DEFAULT_RETRIES: u32 = 3;
pub const DEFAULT_BACKOFF: Duration = Duration::from_millis(500);

/// OpenAI-compatible chat-completion endpoint.
pub struct LiveBackend {
    url: String,
    model: String,
    api_key: Option<String>,
    retries: u32,
    backoff: Duration,
    agent: ureq::Agent,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: Option<ChatMessage>,
    text: Option<String>,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: Option<String>,
}

fn retryable(status: u16) -> bool {
    status == 429 || status >= 500
}

impl LiveBackend {
    pub fn new(url: impl Into<String>, model: impl Into<String>, api_key: Option<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(300)))
            .build()
            .new_agent();
        Self {
            url: url.into(),
            model: model.into(),
            api_key,
            retries: DEFAULT_RETRIES,
            backoff: DEFAULT_BACKOFF,
            agent,
        }
    }

    /// Retry count and the first backoff delay; each retry doubles the delay.
    pub fn with_retry(mut self, retries: u32, backoff: Duration) -> Self {
        self.retries = retries;
        self.backoff = backoff;
        self
    }

    fn attempt(&self, body: &serde_json::Value) -> Result<String, (bool, LlmError)> {
        let mut req = self.agent.post(&self.url).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = match req.send_json(body) {
            Ok(r) => r,
            Err(e) => {
                return Err((
                    true,
                    LlmError::Transport {
                        message: e.to_string(),
                        attempts: 0,
                    },
                ))
            }
        };
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().unwrap_or_default();
        if status != 200 {
            return Err((
                retryable(status),
                LlmError::Http {
                    status,
                    body: text.chars().take(500).collect(),
                    attempts: 0,
                },
            ));
        }
        let parsed: ChatResponse = serde_json::from_str(&text).map_err(|e| (false, LlmError::Malformed(e.to_string())))?;
        let choice = parsed
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| (false, LlmError::Malformed("no choices".into())))?;
        choice
            .message
            .and_then(|m| m.content)
            .or(choice.text)
            .ok_or_else(|| (false, LlmError::Malformed("choice has no content".into())))
    }
}

impl Backend for LiveBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        let body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.attempt(&body) {
                Ok(text) => return Ok(text),
                Err((retry, err)) => {
                    if !retry || attempts > self.retries {
                        return Err(match err {
                            LlmError::Transport { message, .. } => LlmError::Transport { message, attempts },
                            LlmError::Http { status, body, .. } => LlmError::Http { status, body, attempts },
                            other => other,
                        });
                    }
                    thread::sleep(self.backoff * 2u32.pow(attempts - 1));
                }
            }
        }
    }
}

/// Per-session replay scripts shared by both roles.
pub struct ReplayBackend {
    mode: MatchMode,
    cursors: Mutex<HashMap<String, ReplayCursor>>,
}

impl ReplayBackend {
    pub fn new(mode: MatchMode) -> Self {
        Self {
            mode,
            cursors: Mutex::new(HashMap::new()),
        }
    }

    /// Install `entries` as the script for `session`, replacing any previous one.
    pub fn load(&self, session: &str, entries: Vec<ReplayEntry>) {
        let cursor = ReplayCursor::new(session, entries, self.mode);
        self.cursors.lock().expect("replay lock").insert(session.into(), cursor);
    }

    pub fn load_file(&self, session: &str, path: &Path) -> Result<usize, LlmError> {
        let text = std::fs::read_to_string(path).map_err(|e| LlmError::InvalidScript {
            line: 0,
            message: format!("{}: {e}", path.display()),
        })?;
        let entries = parse_script(&text)?;
        let n = entries.len();
        self.load(session, entries);
        Ok(n)
    }

    pub fn warnings(&self, session: &str) -> Vec<ReplayWarning> {
        self.cursors
            .lock()
            .expect("replay lock")
            .get(session)
            .map(|c| c.warnings.clone())
            .unwrap_or_default()
    }

    pub fn remaining(&self, session: &str) -> Option<usize> {
        self.cursors.lock().expect("replay lock").get(session).map(ReplayCursor::remaining)
    }
}

impl Backend for ReplayBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        let mut cursors = self.cursors.lock().expect("replay lock");
        let cursor = cursors
            .get_mut(&request.session)
            .ok_or_else(|| LlmError::UnknownSession(request.session.clone()))?;
        cursor.next_completion(request.role, &request.prompt)
    }
}

/// Wraps a backend and appends every answered call to `<dir>/<session>.jsonl`.
pub struct RecordingBackend {
    inner: Arc<dyn Backend>,
    dir: PathBuf,
    steps: Arc<Mutex<HashMap<String, usize>>>,
}

impl RecordingBackend {
    /// Both roles should share `steps` so step indices follow the session's call order.
    pub fn new(inner: Arc<dyn Backend>, dir: impl Into<PathBuf>, steps: Arc<Mutex<HashMap<String, usize>>>) -> Self {
        Self {
            inner,
            dir: dir.into(),
            steps,
        }
    }
}

impl Backend for RecordingBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        let completion = self.inner.complete(request)?;
        let step = {
            let mut steps = self.steps.lock().expect("record lock");
            let n = steps.entry(request.session.clone()).or_insert(0);
            let step = *n;
            *n += 1;
            step
        };
        let entry = ReplayEntry {
            role: request.role,
            matcher: Matcher::Step(step),
            completion: completion.clone(),
            prompt_hash: Some(prompt_hash(&request.prompt)),
            prompt: None,
        };
        let write = || -> std::io::Result<()> {
            std::fs::create_dir_all(&self.dir)?;
            let mut f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(self.dir.join(format!("{}.jsonl", request.session)))?;
            writeln!(f, "{}", entry.to_line())
        };
        write().map_err(|e| LlmError::Transport {
            message: format!("recording failed: {e}"),
            attempts: 1,
        })?;
        Ok(completion)
    }
}

/// Routes requests by role and keeps the usage ledger.
pub struct Gateway {
    planner: Arc<dyn Backend>,
    sql_generator: Arc<dyn Backend>,
    ledger: Mutex<UsageLedger>,
    max_tokens: u32,
}

impl Gateway {
    pub fn new(planner: Arc<dyn Backend>, sql_generator: Arc<dyn Backend>) -> Self {
        Self {
            planner,
            sql_generator,
            ledger: Mutex::new(UsageLedger::new()),
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }

    pub fn with_max_tokens(mut self, max_tokens: u32) -> Self {
        self.max_tokens = max_tokens;
        self
    }

    /// One completion. Every call that reaches a backend is counted,
    /// whether or not it succeeds.
    pub fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        request.validate()?;
        let backend = match request.role {
            Role::Planner => &self.planner,
            Role::SqlGenerator => &self.sql_generator,
        };
        self.ledger.lock().expect("ledger lock").record(&request.session, request.role);
        backend.complete(request)
    }

    pub fn request(&self, role: Role, prompt: &str, session: &str) -> CompletionRequest {
        let mut r = CompletionRequest::new(role, prompt, session);
        r.max_tokens = self.max_tokens;
        r
    }

    pub fn open_session(&self, session: &str) {
        self.ledger.lock().expect("ledger lock").open_session(session);
    }

    pub fn begin_question(&self, session: &str, question: &str) {
        self.ledger.lock().expect("ledger lock").begin_question(session, question);
    }

    pub fn usage_report(&self, session: &str) -> Result<UsageReport, LlmError> {
        self.ledger.lock().expect("ledger lock").report(session)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(role: Role, step: usize, completion: &str) -> ReplayEntry {
        ReplayEntry {
            role,
            matcher: Matcher::Step(step),
            completion: completion.into(),
            prompt_hash: None,
            prompt: None,
        }
    }

    #[test]
    fn replay_echo_then_exhausted() {
        let replay = Arc::new(ReplayBackend::new(MatchMode::Step));
        replay.load("s", vec![entry(Role::SqlGenerator, 0, "SELECT 1")]);
        let gw = Gateway::new(replay.clone(), replay);
        gw.open_session("s");
        let req = gw.request(Role::SqlGenerator, "q", "s");
        assert_eq!(gw.complete(&req).unwrap(), "SELECT 1");
        assert!(matches!(gw.complete(&req), Err(LlmError::Exhausted { step: 1, .. })));
        assert_eq!(gw.usage_report("s").unwrap().sql_generator_calls, 2);
    }

    #[test]
    fn sessions_are_independent() {
        let replay = Arc::new(ReplayBackend::new(MatchMode::Step));
        replay.load("a", vec![entry(Role::Planner, 0, "A")]);
        replay.load("b", vec![entry(Role::Planner, 0, "B")]);
        let gw = Gateway::new(replay.clone(), replay);
        assert_eq!(gw.complete(&gw.request(Role::Planner, "x", "b")).unwrap(), "B");
        assert_eq!(gw.complete(&gw.request(Role::Planner, "x", "a")).unwrap(), "A");
        assert!(matches!(
            gw.complete(&gw.request(Role::Planner, "x", "c")),
            Err(LlmError::UnknownSession(_))
        ));
    }

    #[test]
    fn unconfigured_role() {
        let gw = Gateway::new(Arc::new(Unconfigured), Arc::new(Unconfigured));
        assert!(matches!(
            gw.complete(&gw.request(Role::Planner, "x", "s")),
            Err(LlmError::Unconfigured(Role::Planner))
        ));
    }

    #[test]
    fn invalid_request_is_not_counted() {
        let gw = Gateway::new(Arc::new(Unconfigured), Arc::new(Unconfigured));
        gw.open_session("s");
        assert!(matches!(
            gw.complete(&gw.request(Role::Planner, "  ", "s")),
            Err(LlmError::InvalidRequest(_))
        ));
        assert_eq!(gw.usage_report("s").unwrap().planner_calls, 0);
    }

    #[test]
    fn recording_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let replay = Arc::new(ReplayBackend::new(MatchMode::Step));
        replay.load("s", vec![entry(Role::Planner, 0, "plan"), entry(Role::SqlGenerator, 1, "SELECT 2")]);
        let steps = Arc::new(Mutex::new(HashMap::new()));
        let rec: Arc<dyn Backend> = Arc::new(RecordingBackend::new(replay, dir.path(), steps));
        let gw = Gateway::new(rec.clone(), rec);
        gw.complete(&gw.request(Role::Planner, "p1", "s")).unwrap();
        gw.complete(&gw.request(Role::SqlGenerator, "p2", "s")).unwrap();

        let exact = Arc::new(ReplayBackend::new(MatchMode::ExactHash));
        exact.load_file("s", &dir.path().join("s.jsonl")).unwrap();
        let gw2 = Gateway::new(exact.clone(), exact);
        assert_eq!(gw2.complete(&gw2.request(Role::Planner, "p1", "s")).unwrap(), "plan");
        assert!(matches!(
            gw2.complete(&gw2.request(Role::SqlGenerator, "changed", "s")),
            Err(LlmError::Mismatch { step: 1, .. })
        ));
    }
}
