//! Pre-execution lint rules R1–R7.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use super::parse::{analyze, Analysis, StatementKind};
use crate::schema::SchemaSnapshot;
use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

/// Stable rule identifiers, serialized as `"R1"` … `"R7"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RuleId {
    /// Not a single read-only SELECT (also covers unparseable input).
    R1,
    /// Table not present in the schema.
    R2,
    /// Column not present in any referenced table or alias.
    R3,
    /// Function outside the dialect allowlist, including geodesic functions.
    R4,
    /// UNION branches with different column counts.
    R5,
    /// Equality filter on `category_name` with a literal absent from the samples.
    R6,
    /// One SELECT block joining two stored tables.
    R7,
}

impl RuleId {
    pub fn as_str(self) -> &'static str {
        match self {
            RuleId::R1 => "R1",
            RuleId::R2 => "R2",
            RuleId::R3 => "R3",
            RuleId::R4 => "R4",
            RuleId::R5 => "R5",
            RuleId::R6 => "R6",
            RuleId::R7 => "R7",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RuleId::R1 => "not-a-select",
            RuleId::R2 => "unknown-table",
            RuleId::R3 => "unknown-column",
            RuleId::R4 => "unsupported-function",
            RuleId::R5 => "cross-table-union-shape",
            RuleId::R6 => "empty-result-risk",
            RuleId::R7 => "multi-table-join",
        }
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SqlDiagnostic {
    pub rule_id: RuleId,
    pub severity: Severity,
    pub message: String,
    /// Byte range `(start, end)` in the linted text.
    pub span: (usize, usize),
    pub suggestion: Option<String>,
}

impl SqlDiagnostic {
    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for SqlDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} [{}..{}]: {}",
            self.rule_id, self.rule_id.name(), self.span.0, self.span.1, self.message
        )?;
        if let Some(s) = &self.suggestion {
            write!(f, " (suggestion: {s})")?;
        }
        Ok(())
    }
}

pub const BBOX_SUGGESTION: &str = "use axis-aligned bounding box";
pub const DISCOVERY_SUGGESTION: &str = "run label discovery";

/// Functions the store implements with PostgreSQL-compatible meaning.
pub const DEFAULT_ALLOWED_FUNCTIONS: &[&str] = &[
    "count", "sum", "avg", "min", "max", "date_trunc", "coalesce", "nullif", "round", "abs",
    "lower", "upper", "length", "substr", "substring", "trim", "ltrim", "rtrim", "date",
    "replace", "concat", "row_number", "rank", "dense_rank", "lag", "lead",
];

/// Geodesic / PostGIS-style names. Anything prefixed `st_` is also geodesic.
pub const GEODESIC_FUNCTIONS: &[&str] = &[
    "earth_distance", "ll_to_earth", "earth_box", "cube", "point", "geography", "geometry",
    "haversine", "great_circle_distance", "distance",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LintConfig {
    pub allowed_functions: BTreeSet<String>,
    /// Extra names treated as geodesic (blocked with the bounding-box suggestion).
    pub blocked_functions: BTreeSet<String>,
}

impl Default for LintConfig {
    fn default() -> Self {
        Self {
            allowed_functions: DEFAULT_ALLOWED_FUNCTIONS.iter().map(|s| s.to_string()).collect(),
            blocked_functions: BTreeSet::new(),
        }
    }
}

impl LintConfig {
    pub fn is_geodesic(&self, name: &str) -> bool {
        name.starts_with("st_")
            || GEODESIC_FUNCTIONS.contains(&name)
            || self.blocked_functions.contains(name)
    }

    fn is_allowed(&self, name: &str) -> bool {
        !self.is_geodesic(name) && self.allowed_functions.contains(name)
    }
}

fn hallucination_hint(name: &str) -> Option<&'static str> {
    Some(match name {
        "dayofweek" | "weekday" | "dow" => "EXTRACT(DOW FROM checkin_time)",
        "hour" | "hours" => "EXTRACT(HOUR FROM checkin_time)",
        "month" => "EXTRACT(MONTH FROM checkin_time)",
        "year" => "EXTRACT(YEAR FROM checkin_time)",
        "day" | "dayofmonth" => "EXTRACT(DAY FROM checkin_time)",
        "date_part" | "datepart" | "strftime" | "to_char" => "EXTRACT(<field> FROM checkin_time)",
        "now" | "getdate" => "a literal timestamp inside the dataset range",
        _ => return None,
    })
}

/// Lint with the default configuration.
pub fn lint(sql: &str, schema: &SchemaSnapshot) -> Vec<SqlDiagnostic> {
    lint_with(sql, schema, &LintConfig::default())
}

pub fn lint_with(sql: &str, schema: &SchemaSnapshot, config: &LintConfig) -> Vec<SqlDiagnostic> {
    let analysis = analyze(sql);
    lint_analysis(sql, &analysis, schema, config)
}

pub fn lint_analysis(
    sql: &str,
    a: &Analysis,
    schema: &SchemaSnapshot,
    config: &LintConfig,
) -> Vec<SqlDiagnostic> {
    let mut out = Vec::new();

    if a.kind == StatementKind::Other {
        let (message, span) = if let Some(f) = &a.failure {
            (format!("could not parse statement: {}", f.message), f.span.clone())
        } else if let Some((kw, span)) = &a.write_keyword {
            (
                format!("statement contains `{}`; only read-only SELECT queries may run", kw.to_ascii_uppercase()),
                span.clone(),
            )
        } else {
            ("statement is not a SELECT query".to_string(), 0..sql.len())
        };
        out.push(SqlDiagnostic {
            rule_id: RuleId::R1,
            severity: Severity::Error,
            message,
            span: (span.start, span.end.min(sql.len())),
            suggestion: None,
        });
        return out;
    }

    // R2
    let mut unknown_table = false;
    for t in a.tables.iter().filter(|t| !t.is_cte) {
        if schema.table(&t.name).is_none() {
            unknown_table = true;
            let known: Vec<&str> = schema.tables.iter().map(|t| t.name.as_str()).collect();
            out.push(SqlDiagnostic {
                rule_id: RuleId::R2,
                severity: Severity::Error,
                message: format!("unknown table `{}`; available: {}", t.name, known.join(", ")),
                span: (t.span.start, t.span.end),
                suggestion: known.first().map(|s| s.to_string()),
            });
        }
    }

    // R3
    if !unknown_table {
        check_columns(a, schema, &mut out);
    }

    // R4
    for f in &a.functions {
        if config.is_allowed(&f.name) {
            continue;
        }
        let (message, suggestion) = if config.is_geodesic(&f.name) {
            (
                format!("geodesic function `{}` is not available in this store", f.name),
                Some(BBOX_SUGGESTION.to_string()),
            )
        } else {
            (
                format!("function `{}` is not in the supported dialect", f.name),
                hallucination_hint(&f.name).map(|h| format!("use {h}")),
            )
        };
        out.push(SqlDiagnostic {
            rule_id: RuleId::R4,
            severity: Severity::Error,
            message,
            span: (f.span.start, f.span.end),
            suggestion,
        });
    }

    // R5
    for group in &a.union_groups {
        let widths: Vec<(usize, usize)> = group
            .iter()
            .map(|b| &a.blocks[*b])
            .filter(|b| !b.star)
            .map(|b| (b.items, b.span_start))
            .collect();
        if let Some((first, _)) = widths.first() {
            if let Some((w, start)) = widths.iter().find(|(w, _)| w != first) {
                out.push(SqlDiagnostic {
                    rule_id: RuleId::R5,
                    severity: Severity::Error,
                    message: format!(
                        "UNION branches have different column counts ({first} vs {w})"
                    ),
                    span: (*start, (*start + 6).min(sql.len())),
                    suggestion: Some(
                        "give every branch the same columns, e.g. a literal city label plus the aggregate"
                            .to_string(),
                    ),
                });
            }
        }
    }

    // R6
    let samples: Vec<&str> = schema
        .sample_values("category_name")
        .filter_map(Value::as_str)
        .collect();
    for lit in a.literal_filters.iter().filter(|l| l.column == "category_name") {
        if !samples.contains(&lit.literal.as_str()) {
            out.push(SqlDiagnostic {
                rule_id: RuleId::R6,
                severity: Severity::Warning,
                message: format!(
                    "category_name literal '{}' does not appear in the sampled labels; the filter may match nothing",
                    lit.literal
                ),
                span: (lit.span.start, lit.span.end),
                suggestion: Some(DISCOVERY_SUGGESTION.to_string()),
            });
        }
    }

    // R7
    for block in &a.blocks {
        let stored: Vec<&String> = block
            .tables
            .iter()
            .filter(|t| schema.table(t).is_some())
            .collect();
        if stored.len() > 1 {
            out.push(SqlDiagnostic {
                rule_id: RuleId::R7,
                severity: Severity::Warning,
                message: format!(
                    "one query block joins {}; cross-dataset comparisons should aggregate each table separately",
                    stored.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(" and ")
                ),
                span: (block.span_start, (block.span_start + 6).min(sql.len())),
                suggestion: Some(
                    "aggregate per table and combine with UNION ALL, then compare".to_string(),
                ),
            });
        }
    }

    out.sort_by(|x, y| x.span.0.cmp(&y.span.0).then(x.rule_id.cmp(&y.rule_id)));
    out
}

fn check_columns(a: &Analysis, schema: &SchemaSnapshot, out: &mut Vec<SqlDiagnostic>) {
    let base: Vec<&crate::schema::TableSchema> = a
        .tables
        .iter()
        .filter(|t| !t.is_cte)
        .filter_map(|t| schema.table(&t.name))
        .collect();
    let known = |name: &str| base.iter().any(|t| t.has_column(name)) || a.aliases.contains(name);

    for c in &a.columns {
        match &c.qualifier {
            None => {
                if !known(&c.name) {
                    out.push(unknown_column(&c.name, c.span.clone(), &base));
                }
            }
            Some(q) => {
                let target = a
                    .tables
                    .iter()
                    .find(|t| t.alias.as_deref() == Some(q.as_str()) || (t.alias.is_none() && &t.name == q));
                match target {
                    Some(t) if !t.is_cte => {
                        if let Some(ts) = schema.table(&t.name) {
                            if !ts.has_column(&c.name) {
                                out.push(unknown_column(&c.name, c.span.clone(), &[ts]));
                            }
                        }
                    }
                    Some(_) => {
                        if !known(&c.name) {
                            out.push(unknown_column(&c.name, c.span.clone(), &base));
                        }
                    }
                    None if a.aliases.contains(q.as_str()) => {
                        if !known(&c.name) {
                            out.push(unknown_column(&c.name, c.span.clone(), &base));
                        }
                    }
                    None => out.push(SqlDiagnostic {
                        rule_id: RuleId::R3,
                        severity: Severity::Error,
                        message: format!("`{q}.{}` uses an undefined table alias `{q}`", c.name),
                        span: (c.span.start, c.span.end),
                        suggestion: None,
                    }),
                }
            }
        }
    }
}

fn unknown_column(
    name: &str,
    span: core::ops::Range<usize>,
    tables: &[&crate::schema::TableSchema],
) -> SqlDiagnostic {
    let mut cols: Vec<&str> = tables
        .iter()
        .flat_map(|t| t.columns.iter().map(|c| c.name.as_str()))
        .collect();
    cols.dedup();
    SqlDiagnostic {
        rule_id: RuleId::R3,
        severity: Severity::Error,
        message: format!("unknown column `{name}`; available columns: {}", cols.join(", ")),
        span: (span.start, span.end),
        suggestion: None,
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::schema::{ColumnSchema, TableSchema};
    use alloc::vec;

    pub(crate) fn checkin_schema() -> SchemaSnapshot {
        let columns: Vec<ColumnSchema> = [
            ("user_id", "TEXT"),
            ("place_id", "TEXT"),
            ("latitude", "REAL"),
            ("longitude", "REAL"),
            ("category_name", "TEXT"),
            ("checkin_time", "TIMESTAMP"),
        ]
        .iter()
        .map(|(n, t)| ColumnSchema {
            name: n.to_string(),
            column_type: t.to_string(),
        })
        .collect();
        let sample = |cat: &str| {
            vec![
                Value::from("470"),
                Value::from("p1"),
                Value::Real(40.72),
                Value::Real(-74.0),
                Value::from(cat),
                Value::from("2012-04-03 14:00:09"),
            ]
        };
        SchemaSnapshot {
            tables: ["checkins_nyc", "checkins_tokyo"]
                .iter()
                .map(|name| TableSchema {
                    name: name.to_string(),
                    columns: columns.clone(),
                    samples: vec![sample("Bar"), sample("Arts & Crafts Store"), sample("Subway")],
                })
                .collect(),
        }
    }

    fn rules(sql: &str) -> Vec<(RuleId, Severity)> {
        lint(sql, &checkin_schema())
            .into_iter()
            .map(|d| (d.rule_id, d.severity))
            .collect()
    }

    #[test]
    fn clean_select_has_no_findings() {
        assert!(rules("SELECT 1").is_empty());
        assert!(rules("SELECT count(*) FROM checkins_nyc").is_empty());
    }

    #[test]
    fn geodesic_call_is_r4_with_bbox_suggestion() {
        let d = lint(
            "SELECT * FROM checkins_nyc WHERE ST_DWithin(ST_MakePoint(longitude, latitude), ST_MakePoint(-73.7781, 40.6413), 2000)",
            &checkin_schema(),
        );
        let r4: Vec<_> = d.iter().filter(|d| d.rule_id == RuleId::R4).collect();
        assert_eq!(r4.len(), 3);
        assert!(r4.iter().all(|d| d.is_error()));
        assert!(r4.iter().all(|d| d.suggestion.as_deref() == Some(BBOX_SUGGESTION)));
    }

    #[test]
    fn unknown_column_names_the_column() {
        let d = lint("SELECT foo FROM checkins_nyc", &checkin_schema());
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].rule_id, RuleId::R3);
        assert!(d[0].message.contains("`foo`"));
        assert_eq!(d[0].span, (7, 10));
    }

    #[test]
    fn drop_is_r1_only() {
        assert_eq!(rules("DROP TABLE checkins_nyc"), [(RuleId::R1, Severity::Error)]);
    }

    #[test]
    fn unknown_table() {
        let d = rules("SELECT c.latitude, c.longitude FROM checkins c WHERE c.category_name = 'Laundry Service'");
        assert_eq!(d[0], (RuleId::R2, Severity::Error));
        assert!(!d.iter().any(|(r, _)| *r == RuleId::R3));
    }

    #[test]
    fn hallucinated_function_gets_hint() {
        let d = lint(
            "SELECT DAYOFWEEK(checkin_time), count(*) FROM checkins_nyc GROUP BY 1",
            &checkin_schema(),
        );
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].rule_id, RuleId::R4);
        assert!(d[0].suggestion.as_deref().unwrap().contains("EXTRACT(DOW"));
    }

    #[test]
    fn union_width_mismatch() {
        let r = rules(
            "SELECT 'nyc', count(*) FROM checkins_nyc UNION ALL SELECT count(*) FROM checkins_tokyo",
        );
        assert_eq!(r, [(RuleId::R5, Severity::Error)]);
        assert!(rules(
            "SELECT 'nyc' AS city, count(*) AS n FROM checkins_nyc UNION ALL SELECT 'tokyo', count(*) FROM checkins_tokyo"
        )
        .is_empty());
    }

    #[test]
    fn category_literal_not_sampled_warns() {
        let d = lint(
            "SELECT * FROM checkins_nyc WHERE category_name = 'Laundromat'",
            &checkin_schema(),
        );
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].rule_id, RuleId::R6);
        assert_eq!(d[0].severity, Severity::Warning);
        assert_eq!(d[0].suggestion.as_deref(), Some(DISCOVERY_SUGGESTION));
        assert!(rules("SELECT * FROM checkins_nyc WHERE category_name = 'Bar'").is_empty());
    }

    #[test]
    fn cross_table_join_warns() {
        let r = rules(
            "SELECT n.category_name, count(*) FROM checkins_nyc n JOIN checkins_tokyo t ON n.category_name = t.category_name GROUP BY 1",
        );
        assert_eq!(r, [(RuleId::R7, Severity::Warning)]);
    }

    #[test]
    fn aliases_and_ctes_are_known() {
        assert!(rules(
            "WITH top AS (SELECT place_id, count(*) AS n FROM checkins_nyc GROUP BY place_id ORDER BY n DESC LIMIT 10) \
             SELECT t.place_id, t.n FROM top t ORDER BY t.n DESC"
        )
        .is_empty());
        assert!(rules(
            "SELECT date_trunc('month', checkin_time) AS month, count(*) AS checkins FROM checkins_nyc \
             WHERE category_name IN ('Bar') GROUP BY month ORDER BY month"
        )
        .is_empty());
    }

    #[test]
    fn bad_qualifier() {
        let d = lint("SELECT x.latitude FROM checkins_nyc", &checkin_schema());
        assert_eq!(d[0].rule_id, RuleId::R3);
        assert!(d[0].message.contains("alias `x`"));
    }

    #[test]
    fn extensible_blocklist() {
        let mut cfg = LintConfig::default();
        cfg.blocked_functions.insert("round".into());
        let d = lint_with("SELECT round(latitude) FROM checkins_nyc", &checkin_schema(), &cfg);
        assert_eq!(d[0].suggestion.as_deref(), Some(BBOX_SUGGESTION));
    }

    #[test]
    fn diagnostics_serialize_with_stable_fields() {
        let d = lint("SELECT foo FROM checkins_nyc", &checkin_schema());
        let json = serde_json::to_string(&d[0]).unwrap();
        assert!(json.starts_with("{\"rule_id\":\"R3\",\"severity\":\"error\",\"message\":"));
        assert!(json.contains("\"span\":[7,10]"));
        assert!(json.ends_with("\"suggestion\":null}"));
    }
}
