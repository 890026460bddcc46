//! Programmatic oracles: reference-result comparison and answer predicates.

use alloc::borrow::ToOwned;
use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::agent::digest::{Comparison, DigestShape};
use crate::agent::trajectory::ArtifactKind;
use crate::agent::digest_results;
use crate::value::{ResultTable, Value};

/// How a system result is compared with a reference result.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompareSpec {
    /// Compare only the first `k` rows in rank order; ties at the cut are accepted.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub top_k: Option<usize>,
    /// Column holding the ranking score; the last column when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score_column: Option<usize>,
    /// Relative tolerance for numeric cells (rounding leniency).
    pub tolerance: f64,
    /// Compare only these column positions.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub columns: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Side {
    pub label: String,
    /// Single-value reference query.
    pub sql: String,
    /// Names the answer may use for this side.
    #[serde(default)]
    pub aliases: Vec<String>,
}

impl Side {
    fn names(&self) -> impl Iterator<Item = &str> {
        core::iter::once(self.label.as_str()).chain(self.aliases.iter().map(String::as_str))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum OracleSpec {
    /// The final result must equal the reference result.
    ReferenceSql {
        sql: String,
        #[serde(default)]
        compare: CompareSpec,
    },
    /// Every reference result must be matched by some system result.
    ReferenceSet {
        sqls: Vec<String>,
        #[serde(default)]
        compare: CompareSpec,
    },
    /// The answer or result digest must name the side with the larger reference value.
    LargerSide { sides: Vec<Side> },
    /// An artifact of `kind` must exist and the inner oracle must pass.
    Artifact { kind: ArtifactKind, oracle: Box<OracleSpec> },
}

impl OracleSpec {
    pub fn validate(&self) -> Result<(), String> {
        match self {
            OracleSpec::ReferenceSql { sql, compare } => {
                non_empty(sql)?;
                validate_compare(compare)
            }
            OracleSpec::ReferenceSet { sqls, compare } => {
                if sqls.is_empty() {
                    return Err("reference_set needs at least one query".into());
                }
                sqls.iter().try_for_each(|s| non_empty(s))?;
                validate_compare(compare)
            }
            OracleSpec::LargerSide { sides } => {
                if sides.len() != 2 {
                    return Err(format!("larger_side needs exactly 2 sides, got {}", sides.len()));
                }
                sides.iter().try_for_each(|s| non_empty(&s.sql))
            }
            OracleSpec::Artifact { kind, oracle } => {
                if *kind == ArtifactKind::Csv {
                    return Err("artifact oracle must require a plot or a map".into());
                }
                oracle.validate()
            }
        }
    }

    /// Every reference query the oracle runs.
    pub fn reference_sqls(&self) -> Vec<&str> {
        match self {
            OracleSpec::ReferenceSql { sql, .. } => alloc::vec![sql.as_str()],
            OracleSpec::ReferenceSet { sqls, .. } => sqls.iter().map(String::as_str).collect(),
            OracleSpec::LargerSide { sides } => sides.iter().map(|s| s.sql.as_str()).collect(),
            OracleSpec::Artifact { oracle, .. } => oracle.reference_sqls(),
        }
    }
}

fn non_empty(sql: &str) -> Result<(), String> {
    if sql.trim().is_empty() {
        Err("empty reference query".into())
    } else {
        Ok(())
    }
}

fn validate_compare(c: &CompareSpec) -> Result<(), String> {
    if !(c.tolerance >= 0.0 && c.tolerance < 1.0) {
        return Err(format!("tolerance {} outside [0, 1)", c.tolerance));
    }
    if c.top_k == Some(0) {
        return Err("top_k must be positive".into());
    }
    Ok(())
}

/// What a system produced for one question, as the oracles see it.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Observed {
    pub succeeded: bool,
    pub failure: Option<String>,
    /// Every executed result, in execution order.
    pub results: Vec<ResultTable>,
    pub answer: String,
    /// Comparisons found by digesting the results.
    pub comparisons: Vec<Comparison>,
    pub artifacts: Vec<ArtifactKind>,
}

impl Observed {
    /// Digest labelled results and keep their comparisons.
    pub fn comparisons_of(labelled: &[(String, &ResultTable)]) -> Vec<Comparison> {
        digest_results(labelled)
            .shapes
            .into_iter()
            .filter_map(|s| match s {
                DigestShape::Comparison(c) => Some(c),
                _ => None,
            })
            .collect()
    }

    /// The last non-empty result, or the last result if all are empty.
    pub fn final_result(&self) -> Option<&ResultTable> {
        self.results
            .iter()
            .rev()
            .find(|t| t.row_count() > 0)
            .or_else(|| self.results.last())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CheckError {
    /// The system's output does not satisfy the oracle.
    Wrong(String),
    /// The oracle itself could not run.
    Oracle(String),
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    if a == b {
        return true;
    }
    let scale = libm::fmax(libm::fabs(a), libm::fabs(b));
    libm::fabs(a - b) <= tol * scale + 1e-9 * libm::fmax(scale, 1.0)
}

fn cell_eq(a: &Value, b: &Value, tol: f64) -> bool {
    match (a, b) {
        (Value::Null, Value::Null) => true,
        (Value::Null, Value::Text(t)) | (Value::Text(t), Value::Null) => t.is_empty(),
        _ => match (a.as_f64(), b.as_f64()) {
            (Some(x), Some(y)) => close(x, y, tol),
            _ => a.to_field().trim() == b.to_field().trim(),
        },
    }
}

fn cell_key(v: &Value) -> String {
    match v {
        Value::Null => String::from("s"),
        _ => match v.as_f64() {
            Some(f) => format!("#{f}"),
            None => format!("s{}", v.to_field().trim()),
        },
    }
}

fn project(table: &ResultTable, columns: &Option<Vec<usize>>) -> Result<Vec<Vec<Value>>, String> {
    match columns {
        None => Ok(table.rows.clone()),
        Some(cols) => {
            if let Some(&c) = cols.iter().find(|&&c| c >= table.columns.len()) {
                return Err(format!("column {c} out of range for {} columns", table.columns.len()));
            }
            Ok(table
                .rows
                .iter()
                .map(|r| cols.iter().map(|&c| r.get(c).cloned().unwrap_or(Value::Null)).collect())
                .collect())
        }
    }
}

fn row_eq(a: &[Value], b: &[Value], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| cell_eq(x, y, tol))
}

/// Match every row of `wanted` to a distinct row of `pool`.
fn greedy_match(wanted: &[Vec<Value>], pool: &[Vec<Value>], tol: f64) -> Result<(), String> {
    let mut used = alloc::vec![false; pool.len()];
    for (i, w) in wanted.iter().enumerate() {
        match (0..pool.len()).find(|&j| !used[j] && row_eq(w, &pool[j], tol)) {
            Some(j) => used[j] = true,
            None => return Err(format!("row {i} has no matching reference row")),
        }
    }
    Ok(())
}

fn width(rows: &[Vec<Value>], table: &ResultTable) -> usize {
    rows.first().map_or(table.columns.len(), Vec::len)
}

/// Compare a system result with a reference result.
pub fn compare_tables(reference: &ResultTable, system: &ResultTable, spec: &CompareSpec) -> Result<(), String> {
    let r = project(reference, &spec.columns)?;
    let s = project(system, &spec.columns)?;
    let (rw, sw) = (width(&r, reference), width(&s, system));
    if rw != sw {
        return Err(format!("{sw} columns, expected {rw}"));
    }
    match spec.top_k {
        Some(k) => compare_top_k(&r, &s, k, spec.score_column.unwrap_or(rw.saturating_sub(1)), spec.tolerance),
        None => {
            if r.len() != s.len() {
                return Err(format!("{} rows, expected {}", s.len(), r.len()));
            }
            if spec.tolerance == 0.0 {
                let keys = |rows: &[Vec<Value>]| {
                    let mut k: Vec<Vec<String>> = rows.iter().map(|row| row.iter().map(cell_key).collect()).collect();
                    k.sort();
                    k
                };
                if keys(&r) == keys(&s) {
                    Ok(())
                } else {
                    Err("rows differ from the reference".into())
                }
            } else {
                greedy_match(&s, &r, spec.tolerance)
            }
        }
    }
}

fn score(row: &[Value], col: usize) -> Option<f64> {
    row.get(col).and_then(Value::as_f64)
}

fn compare_top_k(r: &[Vec<Value>], s: &[Vec<Value>], k: usize, col: usize, tol: f64) -> Result<(), String> {
    let k = k.min(r.len());
    if s.len() < k {
        return Err(format!("{} rows, expected at least {k}", s.len()));
    }
    if k == 0 {
        return Ok(());
    }
    let mut ranked: Vec<&Vec<Value>> = r.iter().collect();
    ranked.sort_by(|a, b| {
        score(b, col)
            .partial_cmp(&score(a, col))
            .unwrap_or(Ordering::Equal)
    });
    let cut = score(ranked[k - 1], col).ok_or_else(|| format!("reference column {col} is not numeric"))?;
    let pool: Vec<Vec<Value>> = ranked
        .into_iter()
        .filter(|row| score(row, col).is_some_and(|v| v >= cut || close(v, cut, tol)))
        .cloned()
        .collect();
    let top = &s[..k];
    for pair in top.windows(2) {
        match (score(&pair[0], col), score(&pair[1], col)) {
            (Some(a), Some(b)) if a >= b || close(a, b, tol) => {}
            _ => return Err("top rows are not in descending order".into()),
        }
    }
    greedy_match(top, &pool, tol)
}

fn normalize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_alphanumeric() { c.to_ascii_lowercase() } else { ' ' })
        .collect::<String>()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

fn names_side(label: &str, side: &Side) -> bool {
    let l = normalize(label);
    side.names().any(|n| normalize(n) == l)
}

/// Position of the first whole-phrase occurrence of any name of `side`.
fn first_mention(text: &str, side: &Side) -> Option<usize> {
    let padded = format!(" {text} ");
    side.names()
        .filter_map(|n| {
            let needle = format!(" {} ", normalize(n));
            padded.find(&needle)
        })
        .min()
}

const MORE_WORDS: &[&str] = &["more", "higher", "larger", "busier", "greater", "exceed", "exceeds", "exceeded", "most"];
const LESS_WORDS: &[&str] = &["fewer", "less", "lower", "smaller", "quieter"];

/// Does any sentence of `answer` say that `larger` beats `smaller`?
pub fn answer_names_larger(answer: &str, larger: &Side, smaller: &Side) -> bool {
    answer.split(['.', '\n', ';']).any(|sentence| {
        let text = normalize(sentence);
        let words: Vec<&str> = text.split(' ').collect();
        let more = words.iter().any(|w| MORE_WORDS.contains(w));
        let less = words.iter().any(|w| LESS_WORDS.contains(w));
        match (first_mention(&text, larger), first_mention(&text, smaller)) {
            (Some(_), None) => more && !less,
            (Some(l), Some(s)) => (more && !less && l < s) || (less && !more && s < l),
            (None, Some(_)) => less && !more,
            (None, None) => false,
        }
    })
}

fn scalar_of(table: &ResultTable) -> Option<f64> {
    match table.rows.as_slice() {
        [row] => row.first().and_then(Value::as_f64),
        _ => None,
    }
}

fn check_inner(
    oracle: &OracleSpec,
    observed: &Observed,
    reference: &mut dyn FnMut(&str) -> Result<ResultTable, String>,
) -> Result<String, CheckError> {
    let run = |reference: &mut dyn FnMut(&str) -> Result<ResultTable, String>, sql: &str| {
        reference(sql).map_err(|e| CheckError::Oracle(format!("reference query failed: {e}")))
    };
    match oracle {
        OracleSpec::ReferenceSql { sql, compare } => {
            let expected = run(reference, sql)?;
            let got = observed
                .final_result()
                .ok_or_else(|| CheckError::Wrong("no result produced".into()))?;
            compare_tables(&expected, got, compare)
                .map(|()| format!("final result matches the reference ({} rows)", expected.row_count()))
                .map_err(CheckError::Wrong)
        }
        OracleSpec::ReferenceSet { sqls, compare } => {
            for (i, sql) in sqls.iter().enumerate() {
                let expected = run(reference, sql)?;
                if !observed
                    .results
                    .iter()
                    .any(|t| compare_tables(&expected, t, compare).is_ok())
                {
                    return Err(CheckError::Wrong(format!("no result matches reference query {}", i + 1)));
                }
            }
            Ok(format!("all {} reference results matched", sqls.len()))
        }
        OracleSpec::LargerSide { sides } => {
            let mut values = Vec::new();
            for side in sides {
                let table = run(reference, &side.sql)?;
                let v = scalar_of(&table)
                    .ok_or_else(|| CheckError::Oracle(format!("reference for {} is not a single number", side.label)))?;
                values.push(v);
            }
            let (larger, smaller) = if values[0] >= values[1] {
                (&sides[0], &sides[1])
            } else {
                (&sides[1], &sides[0])
            };
            let tie = values[0] == values[1];
            let digest_ok = observed.comparisons.iter().any(|c| {
                let forward = names_side(&c.larger, larger) && names_side(&c.smaller, smaller);
                let backward = names_side(&c.larger, smaller) && names_side(&c.smaller, larger);
                forward || (tie && backward)
            });
            let answer_ok = answer_names_larger(&observed.answer, larger, smaller)
                || (tie && answer_names_larger(&observed.answer, smaller, larger));
            if digest_ok || answer_ok {
                Ok(format!(
                    "names {} as larger ({} vs {})",
                    larger.label,
                    num(values[0].max(values[1])),
                    num(values[0].min(values[1]))
                ))
            } else {
                Err(CheckError::Wrong(format!("does not name {} as larger", larger.label)))
            }
        }
        OracleSpec::Artifact { kind, oracle } => {
            if !observed.artifacts.contains(kind) {
                return Err(CheckError::Wrong(format!("no {} artifact", kind.extension())));
            }
            check_inner(oracle, observed, reference).map(|r| format!("{} artifact present; {r}", kind.extension()))
        }
    }
}

fn num(v: f64) -> String {
    if v == libm::trunc(v) {
        format!("{}", v as i64)
    } else {
        format!("{v:.2}")
    }
}

/// Judge one outcome: `Ok(reason)` when correct.
pub fn check_observed(
    oracle: &OracleSpec,
    observed: &Observed,
    reference: &mut dyn FnMut(&str) -> Result<ResultTable, String>,
) -> Result<String, CheckError> {
    if !observed.succeeded {
        let why = observed.failure.clone().unwrap_or_else(|| "run did not succeed".to_owned());
        return Err(CheckError::Wrong(format!("system failed: {why}")));
    }
    check_inner(oracle, observed, reference)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn t(rows: &[(&str, i64)]) -> ResultTable {
        ResultTable::new(
            vec!["name".into(), "n".into()],
            rows.iter().map(|(a, b)| vec![Value::from(*a), Value::Integer(*b)]).collect(),
        )
    }

    #[test]
    fn multiset_ignores_order_and_types() {
        let r = t(&[("a", 1), ("b", 2)]);
        let s = ResultTable::from_text_rows(
            vec!["x".into(), "y".into()],
            vec![vec!["b".into(), "2".into()], vec!["a".into(), "1.0".into()]],
        );
        assert!(compare_tables(&r, &s, &CompareSpec::default()).is_ok());
        assert!(compare_tables(&r, &t(&[("a", 1)]), &CompareSpec::default()).is_err());
        assert!(compare_tables(&r, &t(&[("a", 1), ("b", 3)]), &CompareSpec::default()).is_err());
    }

    #[test]
    fn duplicates_count() {
        let r = t(&[("a", 1), ("a", 1), ("b", 2)]);
        let s = t(&[("a", 1), ("b", 2), ("b", 2)]);
        assert!(compare_tables(&r, &s, &CompareSpec::default()).is_err());
    }

    #[test]
    fn tolerance_accepts_rounding() {
        let r = ResultTable::new(vec!["avg".into()], vec![vec![Value::Real(1.23456)]]);
        let s = ResultTable::new(vec!["avg".into()], vec![vec![Value::Real(1.23)]]);
        let strict = CompareSpec::default();
        let loose = CompareSpec {
            tolerance: 0.01,
            ..CompareSpec::default()
        };
        assert!(compare_tables(&r, &s, &strict).is_err());
        assert!(compare_tables(&r, &s, &loose).is_ok());
    }

    #[test]
    fn top_k_accepts_ties_at_the_cut() {
        let r = t(&[("a", 9), ("b", 5), ("c", 5), ("d", 1)]);
        let spec = CompareSpec {
            top_k: Some(2),
            ..CompareSpec::default()
        };
        assert!(compare_tables(&r, &t(&[("a", 9), ("c", 5)]), &spec).is_ok());
        assert!(compare_tables(&r, &t(&[("a", 9), ("b", 5), ("d", 1)]), &spec).is_ok());
        assert!(compare_tables(&r, &t(&[("a", 9), ("d", 1)]), &spec).is_err());
        assert!(compare_tables(&r, &t(&[("b", 5), ("a", 9)]), &spec).is_err());
        assert!(compare_tables(&r, &t(&[("a", 9)]), &spec).is_err());
    }

    #[test]
    fn projection_selects_columns() {
        let r = t(&[("a", 1)]);
        let s = ResultTable::new(
            vec!["name".into(), "lat".into(), "n".into()],
            vec![vec![Value::from("a"), Value::Real(40.0), Value::Integer(1)]],
        );
        let spec = CompareSpec {
            columns: Some(vec![0]),
            ..CompareSpec::default()
        };
        assert!(compare_tables(&r, &s, &spec).is_ok());
    }

    fn sides() -> Vec<Side> {
        vec![
            Side {
                label: "1pm".into(),
                sql: "a".into(),
                aliases: vec!["13".into(), "1 pm".into()],
            },
            Side {
                label: "1am".into(),
                sql: "b".into(),
                aliases: vec!["1".into(), "1 am".into()],
            },
        ]
    }

    fn scalar(v: i64) -> ResultTable {
        ResultTable::new(vec!["n".into()], vec![vec![Value::Integer(v)]])
    }

    fn refs(a: i64, b: i64) -> impl FnMut(&str) -> Result<ResultTable, String> {
        move |sql| Ok(scalar(if sql == "a" { a } else { b }))
    }

    #[test]
    fn larger_side_from_digest() {
        let table = ResultTable::new(
            vec!["hour".into(), "n".into()],
            vec![vec![Value::Integer(1), Value::Integer(30)], vec![Value::Integer(13), Value::Integer(80)]],
        );
        let labelled = vec![(String::from("NYC"), &table)];
        let observed = Observed {
            succeeded: true,
            comparisons: Observed::comparisons_of(&labelled),
            results: vec![table.clone()],
            ..Observed::default()
        };
        let oracle = OracleSpec::LargerSide { sides: sides() };
        assert!(check_observed(&oracle, &observed, &mut refs(80, 30)).is_ok());
        assert!(matches!(
            check_observed(&oracle, &observed, &mut refs(10, 30)),
            Err(CheckError::Wrong(_))
        ));
    }

    #[test]
    fn larger_side_from_answer_text() {
        let s = sides();
        assert!(answer_names_larger("There were more check-ins at 1pm than at 1am.", &s[0], &s[1]));
        assert!(answer_names_larger("1am saw fewer check-ins than 1pm.", &s[0], &s[1]));
        assert!(!answer_names_larger("1am was busier than 1pm.", &s[0], &s[1]));
        assert!(!answer_names_larger("Counts were 80 and 30.", &s[0], &s[1]));
    }

    #[test]
    fn failure_and_oracle_errors_are_distinct() {
        let oracle = OracleSpec::ReferenceSql {
            sql: "x".into(),
            compare: CompareSpec::default(),
        };
        let failed = Observed::default();
        assert!(matches!(
            check_observed(&oracle, &failed, &mut |_| Ok(scalar(1))),
            Err(CheckError::Wrong(_))
        ));
        let ok = Observed {
            succeeded: true,
            results: vec![scalar(1)],
            ..Observed::default()
        };
        assert!(matches!(
            check_observed(&oracle, &ok, &mut |_| Err("boom".into())),
            Err(CheckError::Oracle(_))
        ));
    }

    #[test]
    fn artifact_required() {
        let oracle = OracleSpec::Artifact {
            kind: ArtifactKind::Map,
            oracle: Box::new(OracleSpec::ReferenceSql {
                sql: "x".into(),
                compare: CompareSpec::default(),
            }),
        };
        let mut observed = Observed {
            succeeded: true,
            results: vec![scalar(1)],
            ..Observed::default()
        };
        assert!(check_observed(&oracle, &observed, &mut |_| Ok(scalar(1))).is_err());
        observed.artifacts.push(ArtifactKind::Map);
        assert!(check_observed(&oracle, &observed, &mut |_| Ok(scalar(1))).is_ok());
    }

    #[test]
    fn final_result_skips_trailing_empty() {
        let observed = Observed {
            results: vec![scalar(1), ResultTable::new(vec!["n".into()], vec![])],
            ..Observed::default()
        };
        assert_eq!(observed.final_result(), Some(&scalar(1)));
    }

    fn arb_table() -> impl Strategy<Value = ResultTable> {
        let cell = prop_oneof![
            any::<i32>().prop_map(|i| Value::Integer(i64::from(i))),
            (-1e6f64..1e6).prop_map(Value::Real),
            "[a-z]{0,6}".prop_map(Value::Text),
        ];
        (1usize..4).prop_flat_map(move |w| {
            proptest::collection::vec(proptest::collection::vec(cell.clone(), w), 0..20)
                .prop_map(move |rows| ResultTable::new((0..w).map(|i| format!("c{i}")).collect(), rows))
        })
    }

    proptest! {
        #[test]
        fn reference_output_is_always_accepted(table in arb_table(), tol in prop_oneof![Just(0.0), 0.0f64..0.1]) {
            let spec = CompareSpec { tolerance: tol, ..CompareSpec::default() };
            prop_assert!(compare_tables(&table, &table, &spec).is_ok());
            let oracle = OracleSpec::ReferenceSql { sql: "q".into(), compare: spec };
            let observed = Observed { succeeded: true, results: vec![table.clone()], ..Observed::default() };
            prop_assert!(check_observed(&oracle, &observed, &mut |_| Ok(table.clone())).is_ok());
        }

        #[test]
        fn row_order_does_not_matter(table in arb_table(), seed in any::<u64>()) {
            let mut shuffled = table.clone();
            let n = shuffled.rows.len();
            if n > 1 {
                let mut s = seed;
                for i in (1..n).rev() {
                    s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    shuffled.rows.swap(i, (s >> 33) as usize % (i + 1));
                }
            }
            prop_assert!(compare_tables(&table, &shuffled, &CompareSpec::default()).is_ok());
        }

        #[test]
        fn top_k_accepts_reference_ranking(scores in proptest::collection::vec(0i64..20, 1..15), k in 1usize..6) {
            let rows: Vec<(String, i64)> = scores.iter().enumerate().map(|(i, s)| (format!("p{i}"), *s)).collect();
            let table = ResultTable::new(
                vec!["p".into(), "n".into()],
                rows.iter().map(|(p, s)| vec![Value::Text(p.clone()), Value::Integer(*s)]).collect(),
            );
            let mut ranked = table.clone();
            ranked.rows.sort_by(|a, b| b[1].as_f64().partial_cmp(&a[1].as_f64()).unwrap());
            let spec = CompareSpec { top_k: Some(k), ..CompareSpec::default() };
            prop_assert!(compare_tables(&table, &ranked, &spec).is_ok());
        }
    }
}
