//! Prompt assembly. Templates are text assets under `crates/core/assets`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use super::trajectory::AgentStep;
use crate::knowledge::Daypart;

pub const PLANNER_SYSTEM: &str = include_str!("../../assets/planner_system.txt");
pub const SQLCODER_TEMPLATE: &str = include_str!("../../assets/sqlcoder_prompt.txt");
pub const NAIVE_SCHEMA: &str = include_str!("../../assets/naive_schema.txt");
pub const SUMMARY_TEMPLATE: &str = include_str!("../../assets/summary_prompt.txt");

/// Single-pass baseline prompt: the question plus the fixed schema text.
pub fn naive_prompt(question: &str) -> String {
    sqlgen_prompt(question, NAIVE_SCHEMA, &[])
}

/// SQL generator prompt with optional knowledge notes.
pub fn sqlgen_prompt(request: &str, schema: &str, notes: &[String]) -> String {
    let notes_text = if notes.is_empty() {
        String::new()
    } else {
        let mut s = String::from("\n### Notes\n");
        for n in notes {
            let _ = writeln!(s, "- {n}");
        }
        s
    };
    SQLCODER_TEMPLATE
        .replace("{question}", request.trim())
        .replace("{schema}", schema.trim_end())
        .replace("{notes}", &notes_text)
}

/// System text, the question and the transcript so far.
pub fn planner_prompt(question: &str, steps: &[AgentStep]) -> String {
    let mut out = String::from(PLANNER_SYSTEM);
    let _ = write!(out, "\nQuestion: {}\n", question.trim());
    for step in steps {
        let _ = write!(out, "\n{}\nObservation: {}\n", step.completion.trim(), step.observation);
    }
    out.push('\n');
    out
}

pub fn daypart_instruction() -> String {
    let names: Vec<String> = Daypart::ALL.iter().map(|d| d.label()).collect();
    format!(
        "The results are hour-of-day counts: organize the answer by daypart, one bullet each for {}.",
        names.join(", ")
    )
}

pub fn summary_prompt(question: &str, digest: &str, artifacts: &[String], draft: &str, instructions: &str) -> String {
    let artifacts = if artifacts.is_empty() {
        String::from("(none)\n")
    } else {
        artifacts.iter().map(|a| format!("- {a}\n")).collect()
    };
    SUMMARY_TEMPLATE
        .replace("{instructions}", instructions)
        .replace("{question}", question.trim())
        .replace("{digest}", digest)
        .replace("{artifacts}", artifacts.trim_end_matches('\n'))
        .replace("{draft}", draft.trim())
}
