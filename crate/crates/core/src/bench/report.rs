//! Verdicts, per-category aggregation and report rendering.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::{self, Write};

use serde::{Deserialize, Serialize};

use super::suite::{BenchmarkQuestion, Category};
use crate::llm::format_two_decimals;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum System {
    Naive,
    Agentic,
}

impl System {
    pub fn as_str(self) -> &'static str {
        match self {
            System::Naive => "naive",
            System::Agentic => "agentic",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            System::Naive => "Naive",
            System::Agentic => "Agentic",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub question: u32,
    pub system: System,
    pub correct: bool,
    pub reason: String,
    pub sql_gen_calls: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub correct: usize,
    pub total: usize,
}

impl Tally {
    pub fn rate(self) -> Option<f64> {
        (self.total > 0).then(|| self.correct as f64 / self.total as f64)
    }
}

/// `7/7 (100%)`, `3/6 (50.0%)`, `0/7 (0%)`.
impl fmt::Display for Tally {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.rate() {
            None => write!(f, "{}/{} (undefined)", self.correct, self.total),
            Some(_) if self.correct == 0 => write!(f, "0/{} (0%)", self.total),
            Some(_) if self.correct == self.total => write!(f, "{0}/{0} (100%)", self.total),
            Some(r) => write!(f, "{}/{} ({:.1}%)", self.correct, self.total, r * 100.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryRow {
    pub category: Category,
    pub tally: Tally,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AggregateError {
    pub missing: Vec<u32>,
    pub duplicated: Vec<u32>,
    pub unknown: Vec<u32>,
}

impl fmt::Display for AggregateError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "incomplete verdict set")?;
        for (label, ids) in [("missing", &self.missing), ("duplicated", &self.duplicated), ("unknown", &self.unknown)] {
            if !ids.is_empty() {
                let ids: Vec<String> = ids.iter().map(|i| format!("Q{i}")).collect();
                write!(f, "; {label}: {}", ids.join(", "))?;
            }
        }
        Ok(())
    }
}

/// Per-category tallies for one system; a multi-tag question counts once per tag.
pub fn aggregate(questions: &[BenchmarkQuestion], verdicts: &[Verdict]) -> Result<Vec<CategoryRow>, AggregateError> {
    let by_id = index_verdicts(questions, verdicts)?;
    Ok(Category::ALL
        .iter()
        .map(|&category| {
            let mut tally = Tally::default();
            for q in questions.iter().filter(|q| q.categories.contains(&category)) {
                tally.total += 1;
                if by_id[&q.id].correct {
                    tally.correct += 1;
                }
            }
            CategoryRow { category, tally }
        })
        .collect())
}

fn index_verdicts<'v>(
    questions: &[BenchmarkQuestion],
    verdicts: &'v [Verdict],
) -> Result<BTreeMap<u32, &'v Verdict>, AggregateError> {
    let mut err = AggregateError::default();
    let mut by_id = BTreeMap::new();
    for v in verdicts {
        if !questions.iter().any(|q| q.id == v.question) {
            err.unknown.push(v.question);
        } else if by_id.insert(v.question, v).is_some() {
            err.duplicated.push(v.question);
        }
    }
    err.missing = questions.iter().map(|q| q.id).filter(|id| !by_id.contains_key(id)).collect();
    if err == AggregateError::default() {
        Ok(by_id)
    } else {
        Err(err)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub system: System,
    pub verdicts: Vec<Verdict>,
    pub categories: Vec<CategoryRow>,
    pub overall: Tally,
    /// `None` for an empty run.
    pub mean_sql_gen_calls: Option<f64>,
    pub mean_sql_gen_calls_display: String,
    pub rates_undefined: bool,
}

pub fn build_report(
    system: System,
    questions: &[BenchmarkQuestion],
    mut verdicts: Vec<Verdict>,
) -> Result<RunReport, AggregateError> {
    let categories = aggregate(questions, &verdicts)?;
    verdicts.sort_by_key(|v| v.question);
    let overall = Tally {
        correct: verdicts.iter().filter(|v| v.correct).count(),
        total: verdicts.len(),
    };
    let mean = (!verdicts.is_empty())
        .then(|| verdicts.iter().map(|v| v.sql_gen_calls).sum::<u64>() as f64 / verdicts.len() as f64);
    Ok(RunReport {
        system,
        verdicts,
        categories,
        overall,
        mean_sql_gen_calls: mean,
        mean_sql_gen_calls_display: mean.map_or_else(|| String::from("undefined"), format_two_decimals),
        rates_undefined: overall.total == 0,
    })
}

/// One row of the per-question correctness fixture.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionMarks {
    pub id: u32,
    pub naive: bool,
    pub agentic: bool,
}

pub fn verdicts_from_marks(marks: &[QuestionMarks], system: System) -> Vec<Verdict> {
    marks
        .iter()
        .map(|m| Verdict {
            question: m.id,
            system,
            correct: match system {
                System::Naive => m.naive,
                System::Agentic => m.agentic,
            },
            reason: String::from("recorded mark"),
            sql_gen_calls: 0,
        })
        .collect()
}

fn mark(report: Option<&RunReport>, id: u32) -> &'static str {
    match report.and_then(|r| r.verdicts.iter().find(|v| v.question == id)) {
        Some(v) if v.correct => "✓",
        Some(_) => "✗",
        None => "",
    }
}

fn tally_cell(report: Option<&RunReport>, category: Option<Category>) -> String {
    let Some(r) = report else { return String::new() };
    match category {
        None => format!("{}", r.overall),
        Some(c) => r
            .categories
            .iter()
            .find(|row| row.category == c)
            .map(|row| format!("{}", row.tally))
            .unwrap_or_default(),
    }
}

/// Markdown with the per-question table and the per-category table.
pub fn render_markdown(questions: &[BenchmarkQuestion], naive: Option<&RunReport>, agentic: Option<&RunReport>) -> String {
    let mut out = String::new();
    out.push_str("## Per-question correctness\n\n| # | User Question | Categories | Naive | Agentic |\n|---:|---|---|:---:|:---:|\n");
    for q in questions {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} |",
            q.id,
            q.text.replace('|', "\\|"),
            q.tags(),
            mark(naive, q.id),
            mark(agentic, q.id)
        );
    }
    let _ = writeln!(
        out,
        "| | **Accuracy (correct/{})** | | **{}** | **{}** |",
        questions.len(),
        tally_cell(naive, None),
        tally_cell(agentic, None)
    );
    out.push_str("\n## Success rates by category\n\n| Category | Naive Accuracy | Agentic Accuracy |\n|---|---|---|\n");
    for c in Category::ALL {
        let _ = writeln!(
            out,
            "| {} ({}) | {} | {} |",
            c.title(),
            c.letter(),
            tally_cell(naive, Some(c)),
            tally_cell(agentic, Some(c))
        );
    }
    let _ = writeln!(
        out,
        "| Overall | {} | {} |",
        tally_cell(naive, None),
        tally_cell(agentic, None)
    );
    out.push_str("\n## SQL generator calls per question\n\n");
    for r in [naive, agentic].into_iter().flatten() {
        let _ = writeln!(out, "- {}: mean {}", r.system.title(), r.mean_sql_gen_calls_display);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::oracle::{CompareSpec, OracleSpec};
    use alloc::collections::BTreeSet;
    use alloc::vec;

    fn q(id: u32, cats: &[Category]) -> BenchmarkQuestion {
        BenchmarkQuestion {
            id,
            text: format!("question {id}"),
            categories: cats.iter().copied().collect::<BTreeSet<_>>(),
            oracle: OracleSpec::ReferenceSql {
                sql: "SELECT 1".into(),
                compare: CompareSpec::default(),
            },
            note: None,
        }
    }

    fn v(id: u32, correct: bool, calls: u64) -> Verdict {
        Verdict {
            question: id,
            system: System::Agentic,
            correct,
            reason: String::new(),
            sql_gen_calls: calls,
        }
    }

    #[test]
    fn tally_formats() {
        assert_eq!(format!("{}", Tally { correct: 10, total: 35 }), "10/35 (28.6%)");
        assert_eq!(format!("{}", Tally { correct: 32, total: 35 }), "32/35 (91.4%)");
        assert_eq!(format!("{}", Tally { correct: 7, total: 7 }), "7/7 (100%)");
        assert_eq!(format!("{}", Tally { correct: 0, total: 7 }), "0/7 (0%)");
        assert_eq!(format!("{}", Tally { correct: 3, total: 6 }), "3/6 (50.0%)");
        assert_eq!(format!("{}", Tally { correct: 0, total: 0 }), "0/0 (undefined)");
    }

    #[test]
    fn multi_tag_counts_once_per_tag() {
        let qs = vec![q(1, &[Category::A, Category::T]), q(2, &[Category::A])];
        let rows = aggregate(&qs, &[v(1, true, 1), v(2, false, 1)]).unwrap();
        let get = |c| rows.iter().find(|r| r.category == c).unwrap().tally;
        assert_eq!(get(Category::A), Tally { correct: 1, total: 2 });
        assert_eq!(get(Category::T), Tally { correct: 1, total: 1 });
        assert_eq!(get(Category::X), Tally { correct: 0, total: 0 });
    }

    #[test]
    fn incomplete_sets_list_every_problem() {
        let qs = vec![q(1, &[Category::A]), q(2, &[Category::A]), q(3, &[Category::B])];
        let err = aggregate(&qs, &[v(1, true, 1), v(1, true, 1), v(9, true, 1)]).unwrap_err();
        assert_eq!(err.missing, vec![2, 3]);
        assert_eq!(err.duplicated, vec![1]);
        assert_eq!(err.unknown, vec![9]);
    }

    #[test]
    fn empty_run_has_undefined_rates() {
        let r = build_report(System::Naive, &[], vec![]).unwrap();
        assert!(r.rates_undefined);
        assert_eq!(r.mean_sql_gen_calls, None);
        assert_eq!(r.mean_sql_gen_calls_display, "undefined");
    }

    #[test]
    fn mean_calls_two_decimals() {
        let qs = vec![q(1, &[Category::A]), q(2, &[Category::A]), q(3, &[Category::A])];
        let r = build_report(System::Agentic, &qs, vec![v(1, true, 1), v(2, true, 2), v(3, true, 2)]).unwrap();
        assert_eq!(r.mean_sql_gen_calls_display, "1.67");
        assert_eq!(r.overall, Tally { correct: 3, total: 3 });
    }

    #[test]
    fn all_correct_is_all_full() {
        let qs: Vec<_> = (1..=5).map(|i| q(i, &Category::ALL)).collect();
        let vs: Vec<_> = (1..=5).map(|i| v(i, true, 1)).collect();
        for row in aggregate(&qs, &vs).unwrap() {
            assert_eq!(row.tally.rate(), Some(1.0));
        }
    }

    #[test]
    fn markdown_has_both_tables() {
        let qs = vec![q(1, &[Category::B])];
        let r = build_report(System::Agentic, &qs, vec![v(1, true, 1)]).unwrap();
        let md = render_markdown(&qs, None, Some(&r));
        assert!(md.contains("| 1 | question 1 | B |  | ✓ |"));
        assert!(md.contains("| Basic Filtering (B) |  | 1/1 (100%) |"));
        assert!(md.contains("Agentic: mean 1.00"));
    }
}
