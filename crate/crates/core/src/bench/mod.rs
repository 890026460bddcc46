//! Question suite, oracles and the per-category scoring that mirrors the
//! published tables.

pub mod oracle;
pub mod report;
pub mod suite;

pub use oracle::{check_observed, compare_tables, CheckError, CompareSpec, Observed, OracleSpec, Side};
pub use report::{
    aggregate, build_report, render_markdown, verdicts_from_marks, AggregateError, CategoryRow, QuestionMarks,
    RunReport, System, Tally, Verdict,
};
pub use suite::{parse_suite, tag_counts, validate_questions, BenchmarkQuestion, Category, SuiteError, EXPECTED_COVERAGE, STATED_COVERAGE};
