//! Runs the question suite through either pipeline and scores it with the oracles.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use geoagent_core::agent::{digest_inputs, result_label, ArtifactKind};
use geoagent_core::bench::{
    build_report, check_observed, parse_suite, render_markdown, BenchmarkQuestion, CheckError, Observed, QuestionMarks,
    RunReport, System, Verdict,
};
use geoagent_core::ResultTable;
use serde::{Deserialize, Serialize};

use crate::engine::{render_naive_answer, Engine, RunOutcome};
use crate::session::{Mode, Session};

/// Row count of the full NYC table; `{{visits:N}}` thresholds scale against it.
pub const FULL_NYC_ROWS: u64 = 227_428;

pub fn load_suite(path: &Path) -> Result<Vec<BenchmarkQuestion>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_suite(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}

pub fn load_marks(path: &Path) -> Result<Vec<QuestionMarks>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Replace each `{{visits:N}}` with `N` scaled by `rows / FULL_NYC_ROWS`, rounded.
pub fn substitute_params(sql: &str, nyc_rows: u64) -> String {
    let mut out = String::new();
    let mut rest = sql;
    while let Some(start) = rest.find("{{visits:") {
        out.push_str(&rest[..start]);
        let after = &rest[start + "{{visits:".len()..];
        match after.find("}}").and_then(|end| after[..end].trim().parse::<u64>().ok().map(|n| (end, n))) {
            Some((end, n)) => {
                let scaled = if nyc_rows >= FULL_NYC_ROWS {
                    n
                } else {
                    ((n as f64) * (nyc_rows as f64) / (FULL_NYC_ROWS as f64)).round() as u64
                };
                out.push_str(&scaled.to_string());
                rest = &after[end + 2..];
            }
            None => {
                out.push_str("{{visits:");
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

fn mode_of(system: System) -> Mode {
    match system {
        System::Naive => Mode::Naive,
        System::Agentic => Mode::Agentic,
    }
}

pub fn script_path(replay_dir: &Path, system: System, question: u32) -> PathBuf {
    replay_dir.join(system.as_str()).join(format!("q{question:02}.jsonl"))
}

/// One scored question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionRun {
    pub verdict: Verdict,
    pub session_id: String,
    pub trajectory_id: String,
    pub answer: String,
    /// Every statement the run sent to the store.
    pub executed_sql: Vec<String>,
}

fn load_all(session: &Session, ids: &[(String, String)]) -> Result<Vec<(String, ResultTable)>> {
    ids.iter()
        .map(|(label, id)| Ok((label.clone(), session.load_result(id, usize::MAX)?)))
        .collect()
}

/// What the oracles see of an outcome, with the statements it executed.
pub fn observe(session: &Session, outcome: &RunOutcome) -> Result<(Observed, Vec<String>)> {
    match outcome {
        RunOutcome::Agentic(o) => {
            let all: Vec<(String, String)> = o
                .executions
                .iter()
                .map(|e| (result_label(&e.sql, &e.result_id), e.result_id.clone()))
                .collect();
            let results: Vec<ResultTable> = load_all(session, &all)?.into_iter().map(|(_, t)| t).collect();
            let digested: Vec<(String, String)> = digest_inputs(&o.executions)
                .into_iter()
                .map(|e| (result_label(&e.sql, &e.result_id), e.result_id.clone()))
                .collect();
            let tables = load_all(session, &digested)?;
            let labelled: Vec<(String, &ResultTable)> = tables.iter().map(|(l, t)| (l.clone(), t)).collect();
            let observed = Observed {
                succeeded: o.succeeded,
                failure: (!o.succeeded).then(|| format!("{:?}: {}", o.stop_reason, o.answer)),
                comparisons: Observed::comparisons_of(&labelled),
                results,
                answer: o.answer.clone(),
                artifacts: o
                    .artifacts
                    .iter()
                    .map(|a| a.kind)
                    .filter(|k| *k != ArtifactKind::Csv)
                    .collect(),
            };
            Ok((observed, o.executions.iter().map(|e| e.sql.clone()).collect()))
        }
        RunOutcome::Naive(o) => {
            let executed = if o.sql.is_empty() { Vec::new() } else { vec![o.sql.clone()] };
            let (results, comparisons) = match &o.execution {
                Ok(ex) => {
                    let table = session.load_result(&ex.result_id, usize::MAX)?;
                    let label = result_label(&o.sql, &ex.result_id);
                    let comparisons = Observed::comparisons_of(&[(label, &table)]);
                    (vec![table], comparisons)
                }
                Err(_) => (Vec::new(), Vec::new()),
            };
            let observed = Observed {
                succeeded: o.execution.is_ok(),
                failure: o.execution.as_ref().err().cloned(),
                results,
                answer: render_naive_answer(o),
                comparisons,
                artifacts: Vec::new(),
            };
            Ok((observed, executed))
        }
    }
}

/// Run and score one question in a fresh session.
pub fn run_question(
    engine: &Engine,
    question: &BenchmarkQuestion,
    system: System,
    replay_dir: Option<&Path>,
) -> Result<QuestionRun> {
    let session = engine.create_session(mode_of(system))?;
    if let Some(replay) = &engine.replay {
        let Some(dir) = replay_dir else {
            bail!("replay backend needs a replay directory");
        };
        let path = script_path(dir, system, question.id);
        replay
            .load_file(session.id(), &path)
            .map_err(|e| anyhow::anyhow!("loading {}: {e}", path.display()))?;
    }
    let (outcome, trajectory_id, _) = engine.run(&session, &question.text)?;
    let (observed, executed_sql) = observe(&session, &outcome)?;
    let sql_gen_calls = match &outcome {
        RunOutcome::Agentic(o) => o.sql_gen_calls,
        RunOutcome::Naive(o) => o.sql_gen_calls,
    };
    let nyc_rows = engine.store.row_count("checkins_nyc").unwrap_or(0);
    let mut reference = |sql: &str| {
        engine
            .store
            .query(&substitute_params(sql, nyc_rows))
            .map_err(|e| e.to_string())
    };
    let (correct, reason) = match check_observed(&question.oracle, &observed, &mut reference) {
        Ok(reason) => (true, reason),
        Err(CheckError::Wrong(reason)) => (false, reason),
        Err(CheckError::Oracle(reason)) => (false, format!("oracle error: {reason}")),
    };
    Ok(QuestionRun {
        verdict: Verdict {
            question: question.id,
            system,
            correct,
            reason,
            sql_gen_calls,
        },
        session_id: session.id().into(),
        trajectory_id,
        answer: observed.answer,
        executed_sql,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteRun {
    pub report: RunReport,
    pub runs: Vec<QuestionRun>,
}

pub fn run_suite(
    engine: &Engine,
    questions: &[BenchmarkQuestion],
    system: System,
    replay_dir: Option<&Path>,
) -> Result<SuiteRun> {
    let mut runs = Vec::with_capacity(questions.len());
    for q in questions {
        runs.push(run_question(engine, q, system, replay_dir).with_context(|| format!("question {}", q.id))?);
    }
    let verdicts = runs.iter().map(|r| r.verdict.clone()).collect();
    let report = build_report(system, questions, verdicts).map_err(|e| anyhow::anyhow!("{e}"))?;
    Ok(SuiteRun { report, runs })
}

/// Write `<out>/<system>.json` for each run and `<out>/report.md` for all of them.
pub fn write_reports(out: &Path, questions: &[BenchmarkQuestion], runs: &[&SuiteRun]) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for run in runs {
        let path = out.join(format!("{}.json", run.report.system.as_str()));
        std::fs::write(&path, serde_json::to_vec_pretty(run)?).with_context(|| format!("writing {}", path.display()))?;
    }
    let find = |s: System| runs.iter().find(|r| r.report.system == s).map(|r| &r.report);
    let md = render_markdown(questions, find(System::Naive), find(System::Agentic));
    std::fs::write(out.join("report.md"), md).with_context(|| format!("writing {}", out.join("report.md").display()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn visits_threshold_scales() {
        let sql = "HAVING COUNT(*) > {{visits:1000}}";
        assert_eq!(substitute_params(sql, 5000), "HAVING COUNT(*) > 22");
        assert_eq!(substitute_params(sql, FULL_NYC_ROWS), "HAVING COUNT(*) > 1000");
        assert_eq!(substitute_params("no params", 1), "no params");
        assert_eq!(substitute_params("{{visits:x}}", 1), "{{visits:x}}");
    }
}
