//! Storage, LLM transport, sessions, benchmark runner and entry points for the
//! check-in NL-to-SQL agent. The algorithms live in `geoagent-core`.

pub mod bench;
pub mod config;
pub mod dialect;
pub mod engine;
pub mod fixture;
pub mod gateway;
pub mod repl;
pub mod server;
pub mod session;
pub mod store;

pub use config::{BackendChoice, Config};
pub use engine::{Engine, QueryResponse, SessionEnv};
pub use session::Mode;
pub use store::Store;
