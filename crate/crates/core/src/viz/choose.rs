use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::VizKind;
use crate::value::{ResultTable, Value};

/// Above this many rows a geographic result is drawn as a heatmap.
pub const HEATMAP_MIN_ROWS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Temporal,
    Categorical,
    Numeric,
    Latitude,
    Longitude,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnProfile {
    pub name: String,
    pub kind: ColumnKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultProfile {
    pub columns: Vec<ColumnProfile>,
    pub row_count: usize,
}

impl ResultProfile {
    pub fn find(&self, kind: ColumnKind) -> Option<&ColumnProfile> {
        self.columns.iter().find(|c| c.kind == kind)
    }
}

const TEMPORAL_NAMES: [&str; 10] = ["month", "hour", "day", "date", "time", "week", "year", "dow", "period", "minute"];

fn looks_like_date(v: &Value) -> bool {
    let Some(s) = v.as_str() else { return false };
    let b = s.as_bytes();
    b.len() >= 7 && b[..4].iter().all(u8::is_ascii_digit) && b[4] == b'-' && b[5..7].iter().all(u8::is_ascii_digit)
}

fn classify(name: &str, values: impl Iterator<Item = Value>) -> ColumnKind {
    let lower = name.to_ascii_lowercase();
    if matches!(lower.as_str(), "latitude" | "lat") {
        return ColumnKind::Latitude;
    }
    if matches!(lower.as_str(), "longitude" | "lon" | "lng") {
        return ColumnKind::Longitude;
    }
    let values: Vec<Value> = values.filter(|v| *v != Value::Null).collect();
    if TEMPORAL_NAMES.iter().any(|t| lower.contains(t)) || (!values.is_empty() && values.iter().all(looks_like_date)) {
        return ColumnKind::Temporal;
    }
    if !values.is_empty() && values.iter().all(|v| v.as_f64().is_some()) {
        ColumnKind::Numeric
    } else {
        ColumnKind::Categorical
    }
}

/// Classify each column from its name and values.
pub fn profile(table: &ResultTable) -> ResultProfile {
    let columns = table
        .columns
        .iter()
        .enumerate()
        .map(|(i, name)| ColumnProfile {
            name: name.clone(),
            kind: classify(name, table.rows.iter().filter_map(|r| r.get(i).cloned())),
        })
        .collect();
    ResultProfile {
        columns,
        row_count: table.row_count(),
    }
}

/// Default chart for a result: spatial, then temporal, then categorical.
pub fn choose_visualization(p: &ResultProfile) -> Option<VizKind> {
    if p.row_count == 0 || (p.row_count == 1 && p.columns.len() <= 1) {
        return None;
    }
    if p.find(ColumnKind::Latitude).is_some() && p.find(ColumnKind::Longitude).is_some() {
        return Some(if p.row_count > HEATMAP_MIN_ROWS {
            VizKind::Heatmap
        } else {
            VizKind::Points
        });
    }
    let first = p.columns.first()?;
    let has_measure = p.columns.iter().skip(1).any(|c| c.kind == ColumnKind::Numeric);
    if !has_measure {
        return None;
    }
    match first.kind {
        ColumnKind::Temporal => Some(VizKind::Line),
        ColumnKind::Categorical => Some(VizKind::Bar),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn table(cols: &[&str], rows: Vec<Vec<Value>>) -> ResultTable {
        ResultTable::new(cols.iter().map(|c| String::from(*c)).collect(), rows)
    }

    #[test]
    fn month_count_is_line() {
        let t = table(&["month", "n"], vec![vec!["2012-04-01 00:00:00".into(), 10i64.into()]; 3]);
        assert_eq!(choose_visualization(&profile(&t)), Some(VizKind::Line));
        let t = table(&["bucket", "n"], vec![vec!["2012-04".into(), 10i64.into()]; 3]);
        assert_eq!(choose_visualization(&profile(&t)), Some(VizKind::Line));
    }

    #[test]
    fn category_count_is_bar() {
        let t = table(&["category_name", "count"], vec![vec!["Bar".into(), 3i64.into()]]);
        assert_eq!(choose_visualization(&profile(&t)), Some(VizKind::Bar));
    }

    #[test]
    fn single_cell_is_none() {
        let t = table(&["count"], vec![vec![5i64.into()]]);
        assert_eq!(choose_visualization(&profile(&t)), None);
    }

    #[test]
    fn geographic_threshold() {
        let row = vec![Value::Real(40.7), Value::Real(-73.9)];
        let small = table(&["latitude", "longitude"], vec![row.clone(); 200]);
        assert_eq!(choose_visualization(&profile(&small)), Some(VizKind::Points));
        let big = table(&["latitude", "longitude"], vec![row; 201]);
        assert_eq!(choose_visualization(&profile(&big)), Some(VizKind::Heatmap));
    }
}
