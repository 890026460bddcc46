mod common;

use std::path::PathBuf;

use geoagent::bench::{self, QuestionRun};
use geoagent::{BackendChoice, Engine};
use geoagent_core::agent::{AgentOutcome, ArtifactKind, StopReason, ToolName};
use geoagent_core::bench::{BenchmarkQuestion, System};
use geoagent_core::sql::lint_with;

fn replay_dir() -> PathBuf {
    common::data("bench/replay")
}

fn suite() -> Vec<BenchmarkQuestion> {
    bench::load_suite(&common::data("bench/suite.json")).unwrap()
}

fn question(qs: &[BenchmarkQuestion], id: u32) -> &BenchmarkQuestion {
    qs.iter().find(|q| q.id == id).unwrap()
}

fn assert_lint_clean(engine: &Engine, run: &QuestionRun) {
    let schema = engine.store.schema(None).unwrap();
    for sql in &run.executed_sql {
        let errors: Vec<_> = lint_with(sql, &schema, &engine.lint).into_iter().filter(|d| d.is_error()).collect();
        assert!(errors.is_empty(), "Q{} executed SQL with lint errors: {sql}\n{errors:?}", run.verdict.question);
    }
}

fn trajectory(engine: &Engine, run: &QuestionRun) -> AgentOutcome {
    let bytes = engine.sessions.trajectory(&run.session_id, &run.trajectory_id).unwrap();
    serde_json::from_slice(&bytes).unwrap()
}

#[test]
fn selected_agent_replays_are_correct_and_deterministic() {
    let (_dir, engine) = common::fixture_engine(BackendChoice::Replay);
    let qs = suite();
    for id in [15, 19, 29, 30, 34] {
        let q = question(&qs, id);
        let first = bench::run_question(&engine, q, System::Agentic, Some(&replay_dir())).unwrap();
        assert!(first.verdict.correct, "Q{id}: {}", first.verdict.reason);
        assert!(!first.executed_sql.is_empty());
        assert_lint_clean(&engine, &first);
        let second = bench::run_question(&engine, q, System::Agentic, Some(&replay_dir())).unwrap();
        assert_eq!(first.verdict, second.verdict, "Q{id}");
        assert_eq!(first.answer, second.answer, "Q{id}");
        assert_eq!(first.executed_sql, second.executed_sql, "Q{id}");
    }
}

#[test]
fn laundromat_trajectory_discovers_labels_then_maps() {
    let (_dir, engine) = common::fixture_engine(BackendChoice::Replay);
    let qs = suite();
    let run = bench::run_question(&engine, question(&qs, 15), System::Agentic, Some(&replay_dir())).unwrap();
    let t = trajectory(&engine, &run);
    assert!(t.trajectory.len() >= 5);
    assert_eq!(t.stop_reason, StopReason::FinalAnswer);
    let tools: Vec<ToolName> = t.trajectory.iter().filter_map(|s| s.action.as_ref().map(|a| a.tool)).collect();
    assert_eq!(tools[0], ToolName::GetDatabaseSchema);
    assert!(tools.contains(&ToolName::GenerateSqlQuery));
    assert!(run.executed_sql[0].contains("DISTINCT") && run.executed_sql[0].to_uppercase().contains("ILIKE"));
    assert!(run.executed_sql.last().unwrap().contains("'Laundry Service'"));
    assert_eq!(t.artifacts.iter().filter(|a| a.kind == ArtifactKind::Map).count(), 1);
}

#[test]
fn nightlife_trajectory_buckets_by_month_and_plots() {
    let (_dir, engine) = common::fixture_engine(BackendChoice::Replay);
    let qs = suite();
    let run = bench::run_question(&engine, question(&qs, 29), System::Agentic, Some(&replay_dir())).unwrap();
    let sql = run.executed_sql.last().unwrap();
    assert!(sql.contains("date_trunc('month', checkin_time)"), "{sql}");
    for c in ["Bar", "Nightclub", "Music Venue"] {
        assert!(sql.contains(&format!("'{c}'")), "{sql}");
    }
    let t = trajectory(&engine, &run);
    assert_eq!(t.artifacts.iter().filter(|a| a.kind == ArtifactKind::Plot).count(), 1);
}

#[test]
fn full_suite_reproduces_the_per_question_marks() {
    let (_dir, engine) = common::fixture_engine(BackendChoice::Replay);
    let qs = suite();
    let marks = bench::load_marks(&common::data("bench/table1_verdicts.json")).unwrap();
    for system in [System::Naive, System::Agentic] {
        let run = bench::run_suite(&engine, &qs, system, Some(&replay_dir())).unwrap();
        for r in &run.runs {
            let m = marks.iter().find(|m| m.id == r.verdict.question).unwrap();
            let want = match system {
                System::Naive => m.naive,
                System::Agentic => m.agentic,
            };
            assert_eq!(r.verdict.correct, want, "{} Q{}: {}", system.as_str(), m.id, r.verdict.reason);
            if system == System::Agentic {
                assert_lint_clean(&engine, r);
            }
            let usage = engine.gateway.usage_report(&r.session_id).unwrap();
            assert_eq!(usage.sql_generator_calls, r.verdict.sql_gen_calls, "Q{}", m.id);
        }
        let total: u64 = run.report.verdicts.iter().map(|v| v.sql_gen_calls).sum();
        let mean = run.report.mean_sql_gen_calls.unwrap();
        assert_eq!(mean, total as f64 / 35.0);
        assert_eq!(run.report.mean_sql_gen_calls_display, format!("{mean:.2}"));
        match system {
            System::Naive => {
                assert!(run.report.verdicts.iter().all(|v| v.sql_gen_calls == 1));
                assert_eq!(run.report.mean_sql_gen_calls_display, "1.00");
                assert_eq!(run.report.overall.to_string(), "10/35 (28.6%)");
            }
            System::Agentic => assert_eq!(run.report.overall.to_string(), "32/35 (91.4%)"),
        }
    }
}

#[test]
fn naive_exposes_raw_errors() {
    let (_dir, engine) = common::fixture_engine(BackendChoice::Replay);
    let qs = suite();
    let run = bench::run_question(&engine, question(&qs, 4), System::Naive, Some(&replay_dir())).unwrap();
    assert!(!run.verdict.correct);
    assert!(run.answer.starts_with("Error:"), "{}", run.answer);
    assert!(run.answer.contains("venue_name"));
}
