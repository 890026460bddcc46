//! Completion requests, replay scripts and per-session call accounting.
//!
//! Transport lives in the `geoagent` crate; this module holds the parts that
//! need no IO: the request shape, the JSONL replay format and its cursor, and
//! the usage ledger.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

pub const DEFAULT_MAX_TOKENS: u32 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Planner,
    SqlGenerator,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Planner => "planner",
            Role::SqlGenerator => "sql_generator",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub role: Role,
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub session: String,
}

impl CompletionRequest {
    /// Request with temperature 0.0 and the default token cap.
    pub fn new(role: Role, prompt: impl Into<String>, session: impl Into<String>) -> Self {
        Self {
            role,
            prompt: prompt.into(),
            temperature: 0.0,
            max_tokens: DEFAULT_MAX_TOKENS,
            session: session.into(),
        }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if self.prompt.trim().is_empty() {
            return Err(LlmError::InvalidRequest("prompt is empty".into()));
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(LlmError::InvalidRequest("temperature must be a non-negative number".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LlmError {
    InvalidRequest(String),
    /// No backend configured for this role.
    Unconfigured(Role),
    Transport { message: String, attempts: u32 },
    Http { status: u16, body: String, attempts: u32 },
    Malformed(String),
    Exhausted { session: String, step: usize },
    Mismatch { step: usize, expected: String, actual: String },
    RoleMismatch { step: usize, expected: Role, actual: Role },
    InvalidScript { line: usize, message: String },
    UnknownSession(String),
}

impl fmt::Display for LlmError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LlmError::InvalidRequest(m) => write!(f, "invalid completion request: {m}"),
            LlmError::Unconfigured(r) => write!(f, "no backend configured for role {r}"),
            LlmError::Transport { message, attempts } => {
                write!(f, "transport failure after {attempts} attempt(s): {message}")
            }
            LlmError::Http { status, body, attempts } => {
                write!(f, "HTTP {status} after {attempts} attempt(s): {body}")
            }
            LlmError::Malformed(m) => write!(f, "malformed completion response: {m}"),
            LlmError::Exhausted { session, step } => {
                write!(f, "replay script exhausted for session {session} at step {step}")
            }
            LlmError::Mismatch { step, expected, actual } => {
                write!(f, "replay mismatch at step {step}: expected prompt hash {expected}, got {actual}")
            }
            LlmError::RoleMismatch { step, expected, actual } => {
                write!(f, "replay mismatch at step {step}: script expects {expected}, call was {actual}")
            }
            LlmError::InvalidScript { line, message } => write!(f, "replay script line {line}: {message}"),
            LlmError::UnknownSession(s) => write!(f, "unknown session {s}"),
        }
    }
}

/// Lowercase hex SHA-256 of the prompt text.
pub fn prompt_hash(prompt: &str) -> String {
    let digest = Sha256::digest(prompt.as_bytes());
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// How a replay entry is matched against the incoming call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Matcher {
    /// The entry answers the call with this zero-based index in the session.
    Step(usize),
    /// The entry answers a call whose prompt hashes to this value.
    Hash(String),
}

impl fmt::Display for Matcher {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Matcher::Step(n) => write!(f, "step:{n}"),
            Matcher::Hash(h) => write!(f, "hash:{h}"),
        }
    }
}

impl core::str::FromStr for Matcher {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(n) = s.strip_prefix("step:") {
            n.parse().map(Matcher::Step).map_err(|_| format!("bad step index '{n}'"))
        } else if let Some(h) = s.strip_prefix("hash:") {
            if h.len() == 64 && h.bytes().all(|b| b.is_ascii_hexdigit()) {
                Ok(Matcher::Hash(h.to_ascii_lowercase()))
            } else {
                Err(format!("bad sha256 '{h}'"))
            }
        } else {
            Err(format!("matcher must start with step: or hash:, got '{s}'"))
        }
    }
}

impl Serialize for Matcher {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Matcher {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One line of a JSONL replay script.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayEntry {
    pub role: Role,
    #[serde(rename = "match")]
    pub matcher: Matcher,
    pub completion: String,
    /// Hash of the prompt seen when the entry was recorded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
}

impl ReplayEntry {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("replay entries serialize")
    }
}

/// Parse a JSONL script; blank lines and `//` comment lines are skipped.
pub fn parse_script(text: &str) -> Result<Vec<ReplayEntry>, LlmError> {
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with("//") {
            continue;
        }
        let entry: ReplayEntry = serde_json::from_str(trimmed).map_err(|e| LlmError::InvalidScript {
            line: i + 1,
            message: e.to_string(),
        })?;
        entries.push(entry);
    }
    Ok(entries)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    /// Entries are consumed in order; a differing prompt hash is only a warning.
    #[default]
    Step,
    /// Every call must carry the recorded prompt hash.
    ExactHash,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayWarning {
    pub step: usize,
    pub expected: String,
    pub actual: String,
}

/// In-order consumer of a replay script for one session.
#[derive(Debug, Clone)]
pub struct ReplayCursor {
    session: String,
    entries: Vec<ReplayEntry>,
    next: usize,
    mode: MatchMode,
    pub warnings: Vec<ReplayWarning>,
}

impl ReplayCursor {
    pub fn new(session: impl Into<String>, entries: Vec<ReplayEntry>, mode: MatchMode) -> Self {
        Self {
            session: session.into(),
            entries,
            next: 0,
            mode,
            warnings: Vec::new(),
        }
    }

    pub fn position(&self) -> usize {
        self.next
    }

    pub fn remaining(&self) -> usize {
        self.entries.len() - self.next
    }

    /// Answer the next call. The cursor only advances on success.
    pub fn next_completion(&mut self, role: Role, prompt: &str) -> Result<String, LlmError> {
        let step = self.next;
        let entry = self.entries.get(step).ok_or_else(|| LlmError::Exhausted {
            session: self.session.clone(),
            step,
        })?;
        if entry.role != role {
            return Err(LlmError::RoleMismatch {
                step,
                expected: entry.role,
                actual: role,
            });
        }
        let actual = prompt_hash(prompt);
        let expected = match &entry.matcher {
            Matcher::Hash(h) => Some(h.clone()),
            Matcher::Step(n) => {
                if *n != step {
                    return Err(LlmError::InvalidScript {
                        line: step + 1,
                        message: format!("entry is for step {n} but is consumed at step {step}"),
                    });
                }
                entry.prompt_hash.clone()
            }
        };
        if let Some(expected) = expected {
            if expected != actual {
                let hard = self.mode == MatchMode::ExactHash || matches!(entry.matcher, Matcher::Hash(_));
                if hard {
                    return Err(LlmError::Mismatch { step, expected, actual });
                }
                self.warnings.push(ReplayWarning { step, expected, actual });
            }
        } else if self.mode == MatchMode::ExactHash {
            return Err(LlmError::Mismatch {
                step,
                expected: String::from("<none recorded>"),
                actual,
            });
        }
        self.next += 1;
        Ok(entry.completion.clone())
    }
}

/// Call counts for one question within a session.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionUsage {
    pub question: String,
    pub planner: u64,
    pub sql_generator: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct SessionUsage {
    questions: Vec<QuestionUsage>,
    /// Calls made before any question was opened.
    unattributed: QuestionUsage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsageReport {
    pub session: String,
    pub planner_calls: u64,
    pub sql_generator_calls: u64,
    pub per_question: Vec<QuestionUsage>,
    pub questions: usize,
    pub mean_sql_generator_calls: f64,
    /// Two-decimal rendering of the mean, e.g. `"1.50"`.
    pub mean_display: String,
    /// Set when no question was answered, so the mean is undefined.
    pub mean_undefined: bool,
}

/// Per-session, per-role, per-question completion counts.
#[derive(Debug, Clone, Default)]
pub struct UsageLedger {
    sessions: BTreeMap<String, SessionUsage>,
}

impl UsageLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn open_session(&mut self, session: &str) {
        self.sessions.entry(session.into()).or_default();
    }

    pub fn has_session(&self, session: &str) -> bool {
        self.sessions.contains_key(session)
    }

    /// Start attributing calls in `session` to a new question.
    pub fn begin_question(&mut self, session: &str, question: &str) {
        self.sessions.entry(session.into()).or_default().questions.push(QuestionUsage {
            question: question.into(),
            ..QuestionUsage::default()
        });
    }

    /// Record one completed call.
    pub fn record(&mut self, session: &str, role: Role) {
        let usage = self.sessions.entry(session.into()).or_default();
        let slot = match usage.questions.last_mut() {
            Some(q) => q,
            None => &mut usage.unattributed,
        };
        match role {
            Role::Planner => slot.planner += 1,
            Role::SqlGenerator => slot.sql_generator += 1,
        }
    }

    /// Counts for the question currently open in `session`.
    pub fn current(&self, session: &str) -> Option<&QuestionUsage> {
        self.sessions.get(session).and_then(|s| s.questions.last())
    }

    pub fn report(&self, session: &str) -> Result<UsageReport, LlmError> {
        let usage = self
            .sessions
            .get(session)
            .ok_or_else(|| LlmError::UnknownSession(session.into()))?;
        let sum = |f: fn(&QuestionUsage) -> u64| -> u64 {
            usage.questions.iter().map(f).sum::<u64>() + f(&usage.unattributed)
        };
        let planner_calls = sum(|q| q.planner);
        let sql_generator_calls = sum(|q| q.sql_generator);
        let questions = usage.questions.len();
        Ok(mean_report(session, planner_calls, sql_generator_calls, usage.questions.clone(), questions))
    }
}

fn mean_report(
    session: &str,
    planner_calls: u64,
    sql_generator_calls: u64,
    per_question: Vec<QuestionUsage>,
    questions: usize,
) -> UsageReport {
    let (mean, undefined) = if questions == 0 {
        (0.0, true)
    } else {
        (sql_generator_calls as f64 / questions as f64, false)
    };
    UsageReport {
        session: session.into(),
        planner_calls,
        sql_generator_calls,
        per_question,
        questions,
        mean_sql_generator_calls: mean,
        mean_display: format_two_decimals(mean),
        mean_undefined: undefined,
    }
}

/// Round half away from zero to two decimals.
pub fn format_two_decimals(x: f64) -> String {
    let scaled = libm::round(x * 100.0);
    format!("{:.2}", scaled / 100.0)
}
