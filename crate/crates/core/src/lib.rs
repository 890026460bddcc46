//! Core algorithms for a tool-using NL-to-SQL agent over check-in data.
//!
//! Everything in this crate is pure and allocation-only (`no_std` + `alloc`):
//! the SQL guard, the knowledge tables, action parsing and the plan-act-observe
//! loop, SVG/HTML rendering and benchmark scoring. Storage, HTTP and the
//! command line live in the `geoagent` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod agent;
pub mod bench;
pub mod knowledge;
pub mod llm;
pub mod schema;
pub mod sql;
pub mod value;
pub mod viz;

pub use schema::{ColumnSchema, SchemaSnapshot, TableSchema};
pub use value::{ResultTable, Value};

/// The two check-in tables shipped by default.
pub const DEFAULT_TABLES: [&str; 2] = ["checkins_nyc", "checkins_tokyo"];
