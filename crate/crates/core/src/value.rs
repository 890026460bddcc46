//! Cell values and in-memory result tables.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

/// A single result cell as returned by the store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Null,
    Integer(i64),
    Real(f64),
    Text(String),
}

impl Value {
    /// Textual form used for persisted CSV fields and previews.
    pub fn to_field(&self) -> String {
        match self {
            Value::Null => String::new(),
            Value::Integer(i) => i.to_string(),
            Value::Real(r) => format_real(*r),
            Value::Text(t) => t.clone(),
        }
    }

    /// Inverse of [`Value::to_field`] for fields read back from CSV: a field
    /// becomes a number only when it re-renders to the same text.
    pub fn from_field(field: &str) -> Value {
        if field.is_empty() {
            return Value::Null;
        }
        if let Ok(i) = field.parse::<i64>() {
            if i.to_string() == field {
                return Value::Integer(i);
            }
        }
        if let Ok(r) = field.parse::<f64>() {
            if r.is_finite() && format_real(r) == field {
                return Value::Real(r);
            }
        }
        Value::Text(field.into())
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Integer(i) => Some(*i as f64),
            Value::Real(r) => Some(*r),
            Value::Text(t) => t.trim().parse::<f64>().ok(),
            Value::Null => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Text(t) => Some(t),
            _ => None,
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, Value::Integer(_) | Value::Real(_))
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_field())
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.to_string())
    }
}

impl From<i64> for Value {
    fn from(i: i64) -> Self {
        Value::Integer(i)
    }
}

impl From<f64> for Value {
    fn from(r: f64) -> Self {
        Value::Real(r)
    }
}

fn format_real(r: f64) -> String {
    if r.is_finite() && r == libm::trunc(r) && libm::fabs(r) < 1e15 {
        // keep a trailing ".0" so reals stay distinguishable from integers
        alloc::format!("{:.1}", r)
    } else {
        alloc::format!("{}", r)
    }
}

/// Column names plus rows, in result order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl ResultTable {
    pub fn new(columns: Vec<String>, rows: Vec<Vec<Value>>) -> Self {
        Self { columns, rows }
    }

    /// Build a table whose cells are all text, as read back from a CSV file.
    pub fn from_text_rows(columns: Vec<String>, rows: Vec<Vec<String>>) -> Self {
        let rows = rows
            .into_iter()
            .map(|r| r.into_iter().map(Value::Text).collect())
            .collect();
        Self { columns, rows }
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns
            .iter()
            .position(|c| c.eq_ignore_ascii_case(name))
    }

    /// Numeric view of one column; `None` if any non-null cell is not numeric.
    pub fn numeric_column(&self, idx: usize) -> Option<Vec<f64>> {
        self.rows
            .iter()
            .map(|r| r.get(idx).and_then(Value::as_f64))
            .collect()
    }
}
