//! Session directories: persisted results, rendered artifacts and trajectories.
//!
//! Layout under the sessions root:
//! `<id>/session.json`, `<id>/index.json`, `<id>/artifacts.json`,
//! `<id>/r1.csv`, `<id>/a1.svg`, `<id>/a2.html`, `<id>/trajectory-t1.json`.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard};

use chrono::{DateTime, Utc};
use geoagent_core::agent::{ArtifactKind, ArtifactRecord, ExecutionOutcome, RowsPage};
use geoagent_core::agent::trajectory::PREVIEW_ROWS;
use geoagent_core::{ResultTable, Value};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Naive,
    #[default]
    Agentic,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Naive => "naive",
            Mode::Agentic => "agentic",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "naive" => Ok(Mode::Naive),
            "agentic" => Ok(Mode::Agentic),
            other => Err(format!("unknown mode '{other}' (expected naive or agentic)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub id: String,
    pub mode: Mode,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultMeta {
    pub id: String,
    pub sql: String,
    pub row_count: usize,
    pub columns: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct Index {
    next_result: u64,
    next_artifact: u64,
    next_trajectory: u64,
    results: Vec<ResultMeta>,
    trajectories: Vec<String>,
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("unknown result {0}")]
    UnknownResult(String),
    #[error("unknown artifact {0}")]
    UnknownArtifact(String),
    #[error("unknown trajectory {0}")]
    UnknownTrajectory(String),
    #[error("{0} belongs to another session")]
    Denied(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Corrupt { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SessionError + '_ {
    move |source| SessionError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Write `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), SessionError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| SessionError::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, SessionError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| SessionError::Corrupt {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), SessionError> {
    let text = serde_json::to_string_pretty(value).expect("session state serializes");
    write_atomic(path, text.as_bytes())
}

/// Session ids are generated uuids; anything else never names a directory.
pub fn valid_session_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-')
}

fn valid_item_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 32 && id.chars().all(|c| c.is_ascii_alphanumeric())
}

struct State {
    index: Index,
    artifacts: Vec<ArtifactRecord>,
}

/// One open session. State changes are written through to disk.
pub struct Session {
    info: SessionInfo,
    dir: PathBuf,
    state: Mutex<State>,
    run_lock: Mutex<()>,
}

impl Session {
    pub fn id(&self) -> &str {
        &self.info.id
    }

    pub fn info(&self) -> &SessionInfo {
        &self.info
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn mode(&self) -> Mode {
        self.info.mode
    }

    /// Held for the duration of one query; runs within a session are serialized.
    pub fn lock_run(&self) -> MutexGuard<'_, ()> {
        self.run_lock.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn state(&self) -> MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn flush(&self, state: &State) -> Result<(), SessionError> {
        write_json(&self.dir.join("index.json"), &state.index)?;
        write_json(&self.dir.join("artifacts.json"), &state.artifacts)
    }

    /// Persist a full result as CSV and index it as a csv artifact.
    pub fn save_result(&self, sql: &str, table: &ResultTable) -> Result<ExecutionOutcome, SessionError> {
        let mut state = self.state();
        state.index.next_result += 1;
        let id = format!("r{}", state.index.next_result);
        let path = self.dir.join(format!("{id}.csv"));
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| SessionError::Corrupt {
            path: path.clone(),
            message: e.to_string(),
        };
        w.write_record(&table.columns).map_err(csv_err)?;
        for row in &table.rows {
            w.write_record(row.iter().map(Value::to_field)).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| SessionError::Corrupt {
            path: path.clone(),
            message: e.to_string(),
        })?;
        write_atomic(&path, &bytes)?;
        state.index.results.push(ResultMeta {
            id: id.clone(),
            sql: sql.into(),
            row_count: table.row_count(),
            columns: table.columns.clone(),
        });
        state.artifacts.push(ArtifactRecord {
            id: id.clone(),
            kind: ArtifactKind::Csv,
            path: path.display().to_string(),
            title: String::new(),
            source_result_id: Some(id.clone()),
        });
        self.flush(&state)?;
        Ok(ExecutionOutcome {
            result_id: id,
            row_count: table.row_count(),
            columns: table.columns.clone(),
            preview: table.rows.iter().take(PREVIEW_ROWS).cloned().collect(),
            result_path: path.display().to_string(),
        })
    }

    pub fn result_meta(&self, result_id: &str) -> Result<ResultMeta, SessionError> {
        self.state()
            .index
            .results
            .iter()
            .find(|r| r.id == result_id)
            .cloned()
            .ok_or_else(|| SessionError::UnknownResult(result_id.into()))
    }

    pub fn results(&self) -> Vec<ResultMeta> {
        self.state().index.results.clone()
    }

    /// Rows `[offset, offset + limit)` of a persisted result.
    pub fn read_page(&self, result_id: &str, offset: usize, limit: usize) -> Result<RowsPage, SessionError> {
        let meta = self.result_meta(result_id)?;
        let path = self.dir.join(format!("{result_id}.csv"));
        let mut reader = csv::Reader::from_path(&path).map_err(|e| SessionError::Corrupt {
            path: path.clone(),
            message: e.to_string(),
        })?;
        let mut rows = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            if i < offset {
                continue;
            }
            if rows.len() >= limit {
                break;
            }
            let rec = rec.map_err(|e| SessionError::Corrupt {
                path: path.clone(),
                message: e.to_string(),
            })?;
            rows.push(rec.iter().map(Value::from_field).collect());
        }
        Ok(RowsPage {
            result_id: result_id.into(),
            offset,
            total: meta.row_count,
            columns: meta.columns,
            rows,
        })
    }

    /// Up to `limit` rows of a persisted result as a table.
    pub fn load_result(&self, result_id: &str, limit: usize) -> Result<ResultTable, SessionError> {
        let page = self.read_page(result_id, 0, limit)?;
        Ok(ResultTable::new(page.columns, page.rows))
    }

    pub fn save_artifact(
        &self,
        kind: ArtifactKind,
        title: &str,
        source_result_id: Option<&str>,
        body: &[u8],
    ) -> Result<ArtifactRecord, SessionError> {
        let mut state = self.state();
        state.index.next_artifact += 1;
        let id = format!("a{}", state.index.next_artifact);
        let path = self.dir.join(format!("{id}.{}", kind.extension()));
        write_atomic(&path, body)?;
        let record = ArtifactRecord {
            id,
            kind,
            path: path.display().to_string(),
            title: title.into(),
            source_result_id: source_result_id.map(String::from),
        };
        state.artifacts.push(record.clone());
        self.flush(&state)?;
        Ok(record)
    }

    pub fn artifacts(&self) -> Vec<ArtifactRecord> {
        self.state().artifacts.clone()
    }

    pub fn artifact_record(&self, id: &str) -> Option<ArtifactRecord> {
        self.state().artifacts.iter().find(|a| a.id == id).cloned()
    }

    /// Stored bytes and media type of an artifact.
    pub fn artifact(&self, id: &str) -> Result<(Vec<u8>, &'static str), SessionError> {
        let record = self
            .artifact_record(id)
            .ok_or_else(|| SessionError::UnknownArtifact(id.into()))?;
        let path = self.dir.join(format!("{id}.{}", record.kind.extension()));
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        Ok((bytes, record.kind.media_type()))
    }

    pub fn save_trajectory<T: Serialize>(&self, trajectory: &T) -> Result<String, SessionError> {
        let mut state = self.state();
        state.index.next_trajectory += 1;
        let id = format!("t{}", state.index.next_trajectory);
        write_json(&self.dir.join(format!("trajectory-{id}.json")), trajectory)?;
        state.index.trajectories.push(id.clone());
        self.flush(&state)?;
        Ok(id)
    }

    pub fn has_trajectory(&self, id: &str) -> bool {
        self.state().index.trajectories.iter().any(|t| t == id)
    }

    pub fn trajectory(&self, id: &str) -> Result<Vec<u8>, SessionError> {
        if !self.has_trajectory(id) {
            return Err(SessionError::UnknownTrajectory(id.into()));
        }
        let path = self.dir.join(format!("trajectory-{id}.json"));
        fs::read(&path).map_err(io_err(&path))
    }
}

/// All sessions under one root directory.
pub struct Sessions {
    root: PathBuf,
    open: Mutex<HashMap<String, Arc<Session>>>,
}

impl Sessions {
    pub fn new(root: impl Into<PathBuf>) -> Result<Self, SessionError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(io_err(&root))?;
        Ok(Self {
            root,
            open: Mutex::new(HashMap::new()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn create(&self, mode: Mode) -> Result<Arc<Session>, SessionError> {
        self.create_with_id(&uuid::Uuid::new_v4().to_string(), mode)
    }

    /// Create a session with a caller-chosen id, replacing any previous one.
    pub fn create_with_id(&self, id: &str, mode: Mode) -> Result<Arc<Session>, SessionError> {
        if !valid_session_id(id) {
            return Err(SessionError::UnknownSession(id.into()));
        }
        let dir = self.root.join(id);
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(io_err(&dir))?;
        }
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let info = SessionInfo {
            id: id.into(),
            mode,
            created_at: Utc::now(),
        };
        write_json(&dir.join("session.json"), &info)?;
        let session = Arc::new(Session {
            info,
            dir,
            state: Mutex::new(State {
                index: Index::default(),
                artifacts: Vec::new(),
            }),
            run_lock: Mutex::new(()),
        });
        session.flush(&session.state())?;
        self.open.lock().unwrap_or_else(|e| e.into_inner()).insert(id.into(), session.clone());
        Ok(session)
    }

    /// An open session, reloading it from disk after a restart.
    pub fn get(&self, id: &str) -> Result<Arc<Session>, SessionError> {
        if !valid_session_id(id) {
            return Err(SessionError::UnknownSession(id.into()));
        }
        let mut open = self.open.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(s) = open.get(id) {
            return Ok(s.clone());
        }
        let dir = self.root.join(id);
        let info_path = dir.join("session.json");
        if !info_path.exists() {
            return Err(SessionError::UnknownSession(id.into()));
        }
        let info: SessionInfo = read_json(&info_path)?;
        let index: Index = read_json(&dir.join("index.json"))?;
        let artifacts: Vec<ArtifactRecord> = read_json(&dir.join("artifacts.json"))?;
        let session = Arc::new(Session {
            info,
            dir,
            state: Mutex::new(State { index, artifacts }),
            run_lock: Mutex::new(()),
        });
        open.insert(id.into(), session.clone());
        Ok(session)
    }

    fn session_ids_on_disk(&self) -> Vec<String> {
        let Ok(entries) = fs::read_dir(&self.root) else {
            return Vec::new();
        };
        entries
            .filter_map(Result::ok)
            .filter(|e| e.path().join("session.json").exists())
            .filter_map(|e| e.file_name().into_string().ok())
            .collect()
    }

    /// True when some other session holds an item with this id.
    fn owned_elsewhere(&self, except: &str, probe: impl Fn(&Session) -> bool) -> bool {
        self.session_ids_on_disk()
            .into_iter()
            .filter(|s| s != except)
            .filter_map(|s| self.get(&s).ok())
            .any(|s| probe(&s))
    }

    /// Artifact bytes, denying ids that only exist in another session.
    pub fn artifact(&self, session: &str, id: &str) -> Result<(Vec<u8>, &'static str), SessionError> {
        let s = self.get(session)?;
        if !valid_item_id(id) {
            return Err(SessionError::UnknownArtifact(id.into()));
        }
        match s.artifact(id) {
            Err(SessionError::UnknownArtifact(_)) if self.owned_elsewhere(session, |o| o.artifact_record(id).is_some()) => {
                Err(SessionError::Denied(id.into()))
            }
            other => other,
        }
    }

    pub fn trajectory(&self, session: &str, id: &str) -> Result<Vec<u8>, SessionError> {
        let s = self.get(session)?;
        if !valid_item_id(id) {
            return Err(SessionError::UnknownTrajectory(id.into()));
        }
        match s.trajectory(id) {
            Err(SessionError::UnknownTrajectory(_)) if self.owned_elsewhere(session, |o| o.has_trajectory(id)) => {
                Err(SessionError::Denied(id.into()))
            }
            other => other,
        }
    }
}
