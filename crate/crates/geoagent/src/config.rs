//! `geoagent.toml` configuration and engine construction.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use anyhow::{Context, Result};
use geoagent_core::agent::AgentConfig;
use geoagent_core::knowledge::{KnowledgeBase, GEOGRAPHY_JSON, HOLIDAYS_JSON, SYNONYMS_JSON};
use geoagent_core::llm::{MatchMode, DEFAULT_MAX_TOKENS};
use geoagent_core::sql::LintConfig;
use geoagent_core::DEFAULT_TABLES;
use serde::{Deserialize, Serialize};

use crate::engine::Engine;
use crate::gateway::{Backend, Gateway, LiveBackend, RecordingBackend, ReplayBackend, Unconfigured, DEFAULT_RETRIES};
use crate::session::Sessions;
use crate::store::{Store, DEFAULT_SKIP_THRESHOLD};

pub const PLANNER_URL_ENV: &str = "GEOAGENT_PLANNER_URL";
pub const SQLGEN_URL_ENV: &str = "GEOAGENT_SQLGEN_URL";
pub const API_KEY_ENV: &str = "GEOAGENT_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StoreConfig {
    pub path: PathBuf,
    pub tables: Vec<String>,
    pub skip_threshold: f64,
}

impl Default for StoreConfig {
    fn default() -> Self {
        Self {
            path: PathBuf::from("geoagent.sqlite"),
            tables: DEFAULT_TABLES.iter().map(|s| s.to_string()).collect(),
            skip_threshold: DEFAULT_SKIP_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnowledgeConfig {
    pub geography: Option<PathBuf>,
    pub holidays: Option<PathBuf>,
    pub synonyms: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub url: Option<String>,
    pub model: String,
    pub api_key: Option<String>,
    pub retries: u32,
    pub backoff_ms: u64,
}

impl BackendConfig {
    fn with_model(model: &str) -> Self {
        Self {
            url: None,
            model: model.into(),
            api_key: None,
            retries: DEFAULT_RETRIES,
            backoff_ms: 500,
        }
    }
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self::with_model("")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LintSettings {
    /// Added to the default function allowlist.
    pub extra_allowed_functions: Vec<String>,
    /// Treated as geodesic in addition to the built-in list.
    pub blocked_functions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub store: StoreConfig,
    pub sessions_dir: PathBuf,
    pub knowledge: KnowledgeConfig,
    pub planner: BackendConfig,
    pub sql_generator: BackendConfig,
    pub max_tokens: u32,
    /// Append every live completion to `<record_dir>/<session>.jsonl`.
    pub record_dir: Option<PathBuf>,
    pub replay_match: MatchMode,
    pub agent: AgentConfig,
    pub lint: LintSettings,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            store: StoreConfig::default(),
            sessions_dir: PathBuf::from("sessions"),
            knowledge: KnowledgeConfig::default(),
            planner: BackendConfig::with_model("mistral-large-latest"),
            sql_generator: BackendConfig::with_model("sqlcoder-8b"),
            max_tokens: DEFAULT_MAX_TOKENS,
            record_dir: None,
            replay_match: MatchMode::Step,
            agent: AgentConfig::default(),
            lint: LintSettings::default(),
        }
    }
}

/// Which completion source the engine uses.
pub enum BackendChoice {
    Live,
    Replay,
}

impl Config {
    /// Read a TOML file, or defaults when `path` is `None`; environment variables override URLs and the key.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
            }
            None => Config::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok());
        Ok(cfg)
    }

    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) {
        if let Some(u) = get(PLANNER_URL_ENV).filter(|s| !s.is_empty()) {
            self.planner.url = Some(u);
        }
        if let Some(u) = get(SQLGEN_URL_ENV).filter(|s| !s.is_empty()) {
            self.sql_generator.url = Some(u);
        }
        if let Some(k) = get(API_KEY_ENV).filter(|s| !s.is_empty()) {
            self.planner.api_key.get_or_insert(k.clone());
            self.sql_generator.api_key.get_or_insert(k);
        }
    }

    pub fn knowledge_base(&self) -> Result<KnowledgeBase> {
        let read = |p: &Option<PathBuf>, builtin: &str| -> Result<String> {
            match p {
                Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display())),
                None => Ok(builtin.to_string()),
            }
        };
        let kb = KnowledgeBase::from_json(
            &read(&self.knowledge.geography, GEOGRAPHY_JSON)?,
            &read(&self.knowledge.holidays, HOLIDAYS_JSON)?,
            &read(&self.knowledge.synonyms, SYNONYMS_JSON)?,
        )
        .map_err(|e| anyhow::anyhow!("knowledge files: {e}"))?;
        Ok(kb)
    }

    pub fn lint_config(&self) -> LintConfig {
        let mut lint = LintConfig::default();
        lint.allowed_functions
            .extend(self.lint.extra_allowed_functions.iter().map(|s| s.to_ascii_lowercase()));
        lint.blocked_functions
            .extend(self.lint.blocked_functions.iter().map(|s| s.to_ascii_lowercase()));
        lint
    }

    pub fn open_store(&self) -> Result<Store> {
        Ok(Store::open(&self.store.path, &self.store.tables)
            .with_context(|| format!("opening store {}", self.store.path.display()))?
            .with_skip_threshold(self.store.skip_threshold))
    }

    fn live(&self, b: &BackendConfig) -> Arc<dyn Backend> {
        match &b.url {
            Some(url) => Arc::new(
                LiveBackend::new(url.clone(), b.model.clone(), b.api_key.clone())
                    .with_retry(b.retries, Duration::from_millis(b.backoff_ms)),
            ),
            None => Arc::new(Unconfigured),
        }
    }

    pub fn build_engine(&self, choice: BackendChoice) -> Result<Engine> {
        let (planner, sqlgen, replay): (Arc<dyn Backend>, Arc<dyn Backend>, _) = match choice {
            BackendChoice::Replay => {
                let r = Arc::new(ReplayBackend::new(self.replay_match));
                (r.clone(), r.clone(), Some(r))
            }
            BackendChoice::Live => {
                let (p, s) = (self.live(&self.planner), self.live(&self.sql_generator));
                match &self.record_dir {
                    Some(dir) => {
                        let steps = Arc::new(Mutex::new(HashMap::new()));
                        (
                            Arc::new(RecordingBackend::new(p, dir, steps.clone())),
                            Arc::new(RecordingBackend::new(s, dir, steps)),
                            None,
                        )
                    }
                    None => (p, s, None),
                }
            }
        };
        Ok(Engine {
            store: self.open_store()?,
            gateway: Arc::new(Gateway::new(planner, sqlgen).with_max_tokens(self.max_tokens)),
            knowledge: self.knowledge_base()?,
            lint: self.lint_config(),
            agent: self.agent.clone(),
            sessions: Sessions::new(&self.sessions_dir)?,
            replay,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_overrides_and_env() {
        let mut cfg: Config = toml::from_str(
            r#"
            sessions_dir = "/tmp/s"
            [store]
            path = "x.sqlite"
            [planner]
            url = "http://planner"
            [agent]
            budget = 5
            "#,
        )
        .unwrap();
        assert_eq!(cfg.agent.budget, 5);
        assert_eq!(cfg.agent.max_retries, 3);
        assert_eq!(cfg.store.tables.len(), 2);
        assert_eq!(cfg.sql_generator.model, "sqlcoder-8b");
        cfg.apply_env(|k| match k {
            SQLGEN_URL_ENV => Some("http://sqlgen".into()),
            API_KEY_ENV => Some("k".into()),
            _ => None,
        });
        assert_eq!(cfg.planner.url.as_deref(), Some("http://planner"));
        assert_eq!(cfg.sql_generator.url.as_deref(), Some("http://sqlgen"));
        assert_eq!(cfg.planner.api_key.as_deref(), Some("k"));
    }
}
