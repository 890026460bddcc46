#![allow(dead_code)]

use std::path::{Path, PathBuf};

use geoagent::{BackendChoice, Config, Engine};
use tempfile::TempDir;

pub fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn data(rel: &str) -> PathBuf {
    repo_root().join("data").join(rel)
}

/// Config rooted in a fresh temporary directory.
pub fn config(dir: &TempDir) -> Config {
    let mut cfg = Config::default();
    cfg.store.path = dir.path().join("store.sqlite");
    cfg.sessions_dir = dir.path().join("sessions");
    cfg
}

/// Engine over the shipped 5,000-row fixture.
pub fn fixture_engine(choice: BackendChoice) -> (TempDir, Engine) {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir);
    let store = cfg.open_store().unwrap();
    store.ingest(data("fixture/nyc.tsv"), "checkins_nyc", None).unwrap();
    store.ingest(data("fixture/tokyo.tsv"), "checkins_tokyo", None).unwrap();
    let engine = cfg.build_engine(choice).unwrap();
    (dir, engine)
}
