//! SQLite-backed check-in store: ingestion, schema snapshots and read-only queries.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDate, NaiveDateTime, Timelike, Datelike};
use geoagent_core::schema::SAMPLE_ROWS;
use geoagent_core::sql::{parse_statement, StatementKind};
use geoagent_core::{ColumnSchema, ResultTable, SchemaSnapshot, TableSchema, Value};
use rusqlite::functions::FunctionFlags;
use rusqlite::types::ValueRef;
use rusqlite::{params, Connection, OpenFlags};
use thiserror::Error;

use crate::dialect::translate;

/// Column layout shared by both check-in tables.
pub const CHECKIN_COLUMNS: [(&str, &str); 6] = [
    ("user_id", "TEXT"),
    ("place_id", "TEXT"),
    ("latitude", "REAL"),
    ("longitude", "REAL"),
    ("category_name", "TEXT"),
    ("checkin_time", "TIMESTAMP"),
];

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%d %H:%M:%S";

/// Fraction of data lines that may be skipped before ingestion aborts.
pub const DEFAULT_SKIP_THRESHOLD: f64 = 0.01;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("table {0} does not exist")]
    UnknownTable(String),
    #[error("{0} is not a configured check-in table")]
    NotCheckinTable(String),
    #[error("line {line}: {message} ({skipped} of {lines} lines unusable, limit {limit_pct:.1}%)")]
    TooManyBadLines {
        line: usize,
        message: String,
        skipped: usize,
        lines: usize,
        limit_pct: f64,
    },
    #[error("only read-only SELECT statements can be executed")]
    WriteRejected,
    #[error("{0}")]
    Sql(String),
}

impl From<rusqlite::Error> for StoreError {
    fn from(e: rusqlite::Error) -> Self {
        StoreError::Sql(e.to_string())
    }
}

/// One validated check-in row.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckinRecord {
    pub user_id: String,
    pub place_id: String,
    pub latitude: f64,
    pub longitude: f64,
    pub category_name: String,
    pub checkin_time: NaiveDateTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceLayout {
    /// user, venue, category id, category, lat, lon, offset minutes, UTC time.
    Dataset,
    /// user, place, lat, lon, category, local timestamp.
    Simple,
}

impl SourceLayout {
    pub fn detect(field_count: usize) -> Option<Self> {
        match field_count {
            8 => Some(SourceLayout::Dataset),
            6 => Some(SourceLayout::Simple),
            _ => None,
        }
    }
}

pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    for fmt in ["%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M", "%Y-%m-%dT%H:%M"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(t);
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
}

fn parse_coordinate(s: &str, name: &str, bound: f64) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("{name} '{s}' is not a number"))?;
    if !v.is_finite() || v.abs() > bound {
        return Err(format!("{name} {v} outside [-{bound}, {bound}]"));
    }
    Ok(v)
}

/// Parse one data line in the given layout.
pub fn parse_line(line: &str, layout: SourceLayout) -> Result<CheckinRecord, String> {
    let f: Vec<&str> = line.split('\t').collect();
    let want = match layout {
        SourceLayout::Dataset => 8,
        SourceLayout::Simple => 6,
    };
    if f.len() != want {
        return Err(format!("expected {want} tab-separated fields, found {}", f.len()));
    }
    let (user, place, cat, lat, lon) = match layout {
        SourceLayout::Dataset => (f[0], f[1], f[3], f[4], f[5]),
        SourceLayout::Simple => (f[0], f[1], f[4], f[2], f[3]),
    };
    let checkin_time = match layout {
        SourceLayout::Dataset => {
            let utc = NaiveDateTime::parse_from_str(f[7].trim(), "%a %b %d %H:%M:%S +0000 %Y")
                .map_err(|_| format!("time '{}' is not in the dataset format", f[7].trim()))?;
            let offset: i64 = f[6]
                .trim()
                .parse()
                .map_err(|_| format!("timezone offset '{}' is not an integer", f[6].trim()))?;
            utc + Duration::minutes(offset)
        }
        SourceLayout::Simple => parse_timestamp(f[5]).ok_or_else(|| format!("time '{}' does not parse", f[5].trim()))?,
    };
    let category_name = cat.trim().to_string();
    if category_name.is_empty() {
        return Err("empty category name".into());
    }
    if user.trim().is_empty() || place.trim().is_empty() {
        return Err("empty user or place id".into());
    }
    Ok(CheckinRecord {
        user_id: user.trim().to_string(),
        place_id: place.trim().to_string(),
        latitude: parse_coordinate(lat, "latitude", 90.0)?,
        longitude: parse_coordinate(lon, "longitude", 180.0)?,
        category_name,
        checkin_time,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestReport {
    pub table: String,
    pub inserted: usize,
    pub skipped: usize,
    /// First few skipped lines with their reasons.
    pub skipped_examples: Vec<(usize, String)>,
}

/// `date_trunc(unit, timestamp)` for the units the generators use.
pub fn date_trunc(unit: &str, ts: NaiveDateTime) -> Option<NaiveDateTime> {
    let d = ts.date();
    let midnight = |d: NaiveDate| d.and_hms_opt(0, 0, 0);
    match unit.to_ascii_lowercase().as_str() {
        "year" => midnight(NaiveDate::from_ymd_opt(d.year(), 1, 1)?),
        "quarter" => midnight(NaiveDate::from_ymd_opt(d.year(), (d.month0() / 3) * 3 + 1, 1)?),
        "month" => midnight(NaiveDate::from_ymd_opt(d.year(), d.month(), 1)?),
        "week" => midnight(d - Duration::days(i64::from(d.weekday().num_days_from_monday()))),
        "day" => midnight(d),
        "hour" => ts.date().and_hms_opt(ts.hour(), 0, 0),
        "minute" => ts.date().and_hms_opt(ts.hour(), ts.minute(), 0),
        "second" => ts.date().and_hms_opt(ts.hour(), ts.minute(), ts.second()),
        _ => None,
    }
}

fn register_functions(conn: &Connection) -> rusqlite::Result<()> {
    conn.create_scalar_function(
        "date_trunc",
        2,
        FunctionFlags::SQLITE_UTF8 | FunctionFlags::SQLITE_DETERMINISTIC,
        |ctx| {
            let unit: String = ctx.get(0)?;
            let ts: Option<String> = ctx.get(1)?;
            let Some(ts) = ts else { return Ok(None) };
            let parsed = parse_timestamp(&ts)
                .ok_or_else(|| rusqlite::Error::UserFunctionError(format!("invalid timestamp '{ts}'").into()))?;
            let truncated = date_trunc(&unit, parsed)
                .ok_or_else(|| rusqlite::Error::UserFunctionError(format!("unsupported date_trunc unit '{unit}'").into()))?;
            Ok(Some(truncated.format(TIMESTAMP_FORMAT).to_string()))
        },
    )
}

fn to_value(v: ValueRef<'_>) -> Value {
    match v {
        ValueRef::Null => Value::Null,
        ValueRef::Integer(i) => Value::Integer(i),
        ValueRef::Real(r) => Value::Real(r),
        ValueRef::Text(t) => Value::Text(String::from_utf8_lossy(t).into_owned()),
        ValueRef::Blob(b) => Value::Text(b.iter().map(|x| format!("{x:02x}")).collect()),
    }
}

/// Handle on one database file holding the check-in tables.
#[derive(Debug, Clone)]
pub struct Store {
    path: PathBuf,
    tables: Vec<String>,
    skip_threshold: f64,
}

impl Store {
    /// Open (creating if needed) the database at `path` with the given check-in tables.
    pub fn open(path: impl AsRef<Path>, tables: &[String]) -> Result<Self, StoreError> {
        let path = path.as_ref().to_path_buf();
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|source| StoreError::Io {
                path: parent.to_path_buf(),
                source,
            })?;
        }
        let conn = Connection::open(&path)?;
        let cols: Vec<String> = CHECKIN_COLUMNS.iter().map(|(n, t)| format!("{n} {t}")).collect();
        for t in tables {
            if !t.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(StoreError::NotCheckinTable(t.clone()));
            }
            conn.execute_batch(&format!("CREATE TABLE IF NOT EXISTS {t} ({});", cols.join(", ")))?;
        }
        Ok(Self {
            path,
            tables: tables.to_vec(),
            skip_threshold: DEFAULT_SKIP_THRESHOLD,
        })
    }

    pub fn with_skip_threshold(mut self, threshold: f64) -> Self {
        self.skip_threshold = threshold;
        self
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn tables(&self) -> &[String] {
        &self.tables
    }

    /// A connection that cannot write, with the dialect functions registered.
    pub fn read_connection(&self) -> Result<Connection, StoreError> {
        let conn = Connection::open_with_flags(
            &self.path,
            OpenFlags::SQLITE_OPEN_READ_ONLY | OpenFlags::SQLITE_OPEN_NO_MUTEX | OpenFlags::SQLITE_OPEN_URI,
        )?;
        conn.pragma_update(None, "query_only", true)?;
        register_functions(&conn)?;
        Ok(conn)
    }

    /// Replace the contents of `table` with the rows of a TSV file.
    pub fn ingest(&self, path: impl AsRef<Path>, table: &str, limit: Option<usize>) -> Result<IngestReport, StoreError> {
        let path = path.as_ref();
        if !self.tables.iter().any(|t| t == table) {
            return Err(StoreError::NotCheckinTable(table.into()));
        }
        if !path.exists() {
            return Err(StoreError::FileNotFound(path.to_path_buf()));
        }
        let io = |source| StoreError::Io {
            path: path.to_path_buf(),
            source,
        };
        let reader = BufReader::new(File::open(path).map_err(io)?);
        let mut conn = Connection::open(&self.path)?;
        let tx = conn.transaction()?;
        tx.execute(&format!("DELETE FROM {table}"), [])?;
        let mut layout = None;
        let mut lines = 0usize;
        let mut inserted = 0usize;
        let mut skipped = Vec::new();
        {
            let mut stmt = tx.prepare(&format!(
                "INSERT INTO {table} (user_id, place_id, latitude, longitude, category_name, checkin_time) VALUES (?1, ?2, ?3, ?4, ?5, ?6)"
            ))?;
            for (idx, raw) in reader.split(b'\n').enumerate() {
                if limit.is_some_and(|l| inserted >= l) {
                    break;
                }
                let raw = raw.map_err(io)?;
                let line = String::from_utf8_lossy(&raw);
                let line = line.trim_end_matches(['\r', '\n']);
                if line.trim().is_empty() {
                    continue;
                }
                if layout.is_none() && lines == 0 && line.starts_with("user_id\t") {
                    continue;
                }
                lines += 1;
                let layout = *layout.get_or_insert_with(|| {
                    SourceLayout::detect(line.split('\t').count()).unwrap_or(SourceLayout::Dataset)
                });
                match parse_line(line, layout) {
                    Ok(r) => {
                        stmt.execute(params![
                            r.user_id,
                            r.place_id,
                            r.latitude,
                            r.longitude,
                            r.category_name,
                            r.checkin_time.format(TIMESTAMP_FORMAT).to_string()
                        ])?;
                        inserted += 1;
                    }
                    Err(message) => skipped.push((idx + 1, message)),
                }
            }
        }
        if !skipped.is_empty() && skipped.len() as f64 > self.skip_threshold * lines as f64 {
            let (line, message) = skipped[0].clone();
            return Err(StoreError::TooManyBadLines {
                line,
                message,
                skipped: skipped.len(),
                lines,
                limit_pct: self.skip_threshold * 100.0,
            });
        }
        tx.commit()?;
        let count = skipped.len();
        skipped.truncate(20);
        Ok(IngestReport {
            table: table.into(),
            inserted,
            skipped: count,
            skipped_examples: skipped,
        })
    }

    /// Tables with their columns and up to three rows in insertion order.
    pub fn schema(&self, table: Option<&str>) -> Result<SchemaSnapshot, StoreError> {
        let conn = self.read_connection()?;
        let names: Vec<String> = match table {
            Some(t) => {
                let exists: bool = conn.query_row(
                    "SELECT EXISTS(SELECT 1 FROM sqlite_master WHERE type = 'table' AND name = ?1 COLLATE NOCASE)",
                    [t],
                    |r| r.get(0),
                )?;
                if !exists {
                    return Err(StoreError::UnknownTable(t.into()));
                }
                vec![t.to_ascii_lowercase()]
            }
            None => self.tables.clone(),
        };
        let mut tables = Vec::new();
        for name in names {
            let mut stmt = conn.prepare(&format!("PRAGMA table_info({name})"))?;
            let columns = stmt
                .query_map([], |r| {
                    Ok(ColumnSchema {
                        name: r.get(1)?,
                        column_type: r.get(2)?,
                    })
                })?
                .collect::<Result<Vec<_>, _>>()?;
            let sample = self.run(&conn, &format!("SELECT * FROM {name} ORDER BY rowid LIMIT {SAMPLE_ROWS}"))?;
            tables.push(TableSchema {
                name,
                columns,
                samples: sample.rows,
            });
        }
        Ok(SchemaSnapshot { tables })
    }

    fn run(&self, conn: &Connection, sql: &str) -> Result<ResultTable, StoreError> {
        let mut stmt = conn.prepare(sql)?;
        if !stmt.readonly() {
            return Err(StoreError::WriteRejected);
        }
        let columns: Vec<String> = stmt.column_names().into_iter().map(String::from).collect();
        let n = columns.len();
        let mut rows = Vec::new();
        let mut cursor = stmt.query([])?;
        while let Some(row) = cursor.next()? {
            rows.push((0..n).map(|i| row.get_ref(i).map(to_value)).collect::<Result<Vec<_>, _>>()?);
        }
        Ok(ResultTable::new(columns, rows))
    }

    /// Execute one read-only statement written in the generators' dialect.
    pub fn query(&self, sql: &str) -> Result<ResultTable, StoreError> {
        if parse_statement(sql).statement_kind != StatementKind::Select {
            return Err(StoreError::WriteRejected);
        }
        let conn = self.read_connection()?;
        self.run(&conn, &translate(sql))
    }

    pub fn distinct_labels(&self, table: &str) -> Result<Vec<String>, StoreError> {
        if !self.tables.iter().any(|t| t.eq_ignore_ascii_case(table)) {
            return Err(StoreError::UnknownTable(table.into()));
        }
        let t = self.query(&format!("SELECT DISTINCT category_name FROM {table} ORDER BY 1"))?;
        Ok(t.rows.into_iter().filter_map(|r| r.into_iter().next()).map(|v| v.to_field()).collect())
    }

    pub fn row_count(&self, table: &str) -> Result<u64, StoreError> {
        let t = self.query(&format!("SELECT COUNT(*) FROM {table}"))?;
        Ok(t.rows[0][0].as_f64().unwrap_or(0.0) as u64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_line_applies_offset() {
        let line = "470\t49bbd6c0f964a520f4531fe3\t4bf58dd8d48988d127951735\tArts & Crafts Store\t40.719810375488535\t-74.00258103213994\t-240\tTue Apr 03 18:00:09 +0000 2012";
        let r = parse_line(line, SourceLayout::Dataset).unwrap();
        assert_eq!(r.checkin_time.format(TIMESTAMP_FORMAT).to_string(), "2012-04-03 14:00:09");
        assert_eq!(r.category_name, "Arts & Crafts Store");
        assert_eq!(r.place_id, "49bbd6c0f964a520f4531fe3");
    }

    #[test]
    fn simple_line() {
        let r = parse_line("1\tp\t40.7\t-73.9\tBar\t2012-05-01 23:10:00", SourceLayout::Simple).unwrap();
        assert_eq!(r.latitude, 40.7);
        assert_eq!(r.category_name, "Bar");
    }

    #[test]
    fn invalid_lines() {
        assert!(parse_line("1\tp\t95\t-73.9\tBar\t2012-05-01 23:10:00", SourceLayout::Simple).is_err());
        assert!(parse_line("1\tp\t40\t-73.9\t \t2012-05-01 23:10:00", SourceLayout::Simple).is_err());
        assert!(parse_line("1\tp\t40\t-73.9\tBar\tyesterday", SourceLayout::Simple).is_err());
        assert!(parse_line("1\tp\t40", SourceLayout::Simple).is_err());
    }

    #[test]
    fn trunc_units() {
        let ts = parse_timestamp("2012-11-22 13:45:10").unwrap();
        let f = |u| date_trunc(u, ts).unwrap().format(TIMESTAMP_FORMAT).to_string();
        assert_eq!(f("month"), "2012-11-01 00:00:00");
        assert_eq!(f("year"), "2012-01-01 00:00:00");
        assert_eq!(f("week"), "2012-11-19 00:00:00");
        assert_eq!(f("day"), "2012-11-22 00:00:00");
        assert_eq!(f("hour"), "2012-11-22 13:00:00");
        assert_eq!(f("quarter"), "2012-10-01 00:00:00");
        assert!(date_trunc("fortnight", ts).is_none());
    }
}
