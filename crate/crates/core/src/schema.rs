//! Schema snapshots exchanged between the store, the guard and the agent.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::value::Value;

/// Maximum sample rows carried per table.
pub const SAMPLE_ROWS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    #[serde(rename = "type")]
    pub column_type: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSchema {
    pub name: String,
    pub columns: Vec<ColumnSchema>,
    /// First rows in insertion order, at most [`SAMPLE_ROWS`].
    pub samples: Vec<Vec<Value>>,
}

impl TableSchema {
    pub fn has_column(&self, name: &str) -> bool {
        self.columns.iter().any(|c| c.name.eq_ignore_ascii_case(name))
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns
            .iter()
            .position(|c| c.name.eq_ignore_ascii_case(name))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SchemaSnapshot {
    pub tables: Vec<TableSchema>,
}

impl SchemaSnapshot {
    pub fn table(&self, name: &str) -> Option<&TableSchema> {
        self.tables.iter().find(|t| t.name.eq_ignore_ascii_case(name))
    }

    /// Sample values of `column` across every table that has it.
    pub fn sample_values<'a>(&'a self, column: &'a str) -> impl Iterator<Item = &'a Value> + 'a {
        self.tables.iter().flat_map(move |t| {
            let idx = t.column_index(column);
            t.samples.iter().filter_map(move |row| idx.and_then(|i| row.get(i)))
        })
    }

    /// Compact text rendering used inside prompts.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for table in &self.tables {
            let _ = writeln!(out, "CREATE TABLE {} (", table.name);
            for (i, col) in table.columns.iter().enumerate() {
                let sep = if i + 1 == table.columns.len() { "" } else { "," };
                let _ = writeln!(out, "  {} {}{}", col.name, col.column_type, sep);
            }
            out.push_str(");\n");
            if !table.samples.is_empty() {
                let _ = writeln!(out, "-- {} sample rows:", table.samples.len());
                for row in &table.samples {
                    let cells: Vec<String> = row.iter().map(Value::to_field).collect();
                    let _ = writeln!(out, "-- {}", cells.join(" | "));
                }
            }
        }
        out
    }
}
