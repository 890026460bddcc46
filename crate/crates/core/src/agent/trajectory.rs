use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::action::Action;
use crate::value::Value;

/// Default per-step observation budget in bytes.
pub const OBSERVATION_BUDGET: usize = 2000;
/// Rows shown after an execution.
pub const PREVIEW_ROWS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepStatus {
    Ok,
    ToolError,
    ParseError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentStep {
    pub index: usize,
    pub thought: String,
    /// `None` when the completion could not be parsed.
    pub action: Option<Action>,
    /// The planner completion this step was parsed from.
    pub completion: String,
    pub observation: String,
    pub status: StepStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArtifactKind {
    Csv,
    Plot,
    Map,
}

impl ArtifactKind {
    pub fn media_type(self) -> &'static str {
        match self {
            ArtifactKind::Csv => "text/csv; charset=utf-8",
            ArtifactKind::Plot => "image/svg+xml",
            ArtifactKind::Map => "text/html; charset=utf-8",
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            ArtifactKind::Csv => "csv",
            ArtifactKind::Plot => "svg",
            ArtifactKind::Map => "html",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub id: String,
    pub kind: ArtifactKind,
    pub path: String,
    #[serde(default)]
    pub title: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_result_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionOutcome {
    pub result_id: String,
    pub row_count: usize,
    pub columns: Vec<String>,
    pub preview: Vec<Vec<Value>>,
    pub result_path: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowsPage {
    pub result_id: String,
    pub offset: usize,
    pub total: usize,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

/// One SQL statement the agent ran.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionRecord {
    pub step: usize,
    pub sql: String,
    pub result_id: String,
    pub row_count: usize,
    pub columns: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    FinalAnswer,
    BudgetExhausted,
    RetryLimit,
    ParseFailures,
    GatewayError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentOutcome {
    pub question: String,
    pub answer: String,
    pub artifacts: Vec<ArtifactRecord>,
    pub trajectory: Vec<AgentStep>,
    pub executions: Vec<ExecutionRecord>,
    pub sql_gen_calls: u64,
    pub planner_calls: u64,
    pub succeeded: bool,
    pub stop_reason: StopReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveOutcome {
    pub question: String,
    pub sql: String,
    pub execution: Result<ExecutionOutcome, String>,
    pub sql_gen_calls: u64,
}

impl NaiveOutcome {
    pub fn preview(&self) -> &[Vec<Value>] {
        match &self.execution {
            Ok(e) => &e.preview,
            Err(_) => &[],
        }
    }
}

/// Cut `text` to at most `budget` bytes, ending with an elision marker.
pub fn truncate_observation(text: &str, budget: usize) -> String {
    if text.len() <= budget {
        return text.into();
    }
    // the elided count is at most text.len(), so this marker is the longest
    let widest = alloc::format!("\n[... {} bytes elided]", text.len()).len();
    let mut cut = budget.saturating_sub(widest);
    while !text.is_char_boundary(cut) {
        cut -= 1;
    }
    let mut out = String::from(&text[..cut]);
    out.push_str(&alloc::format!("\n[... {} bytes elided]", text.len() - cut));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn short_text_untouched() {
        assert_eq!(truncate_observation("abc", 10), "abc");
    }

    #[test]
    fn long_text_has_marker() {
        let text = "x".repeat(5000);
        let out = truncate_observation(&text, 2000);
        assert!(out.len() <= 2000);
        assert!(out.ends_with("bytes elided]"));
    }

    proptest! {
        #[test]
        fn never_exceeds_budget(text in "\\PC{0,600}", budget in 40usize..400) {
            let out = truncate_observation(&text, budget);
            prop_assert!(out.len() <= budget);
            if text.len() > budget {
                prop_assert!(out.contains("bytes elided]"));
                let kept = &out[..out.rfind("\n[... ").unwrap()];
                prop_assert!(text.starts_with(kept));
            } else {
                prop_assert_eq!(out, text);
            }
        }
    }
}
