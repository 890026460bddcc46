//! Action grammar, prompts, trajectories and the agent loop.

pub mod action;
pub mod borough;
pub mod digest;
pub mod prompts;
pub mod run;
pub mod trajectory;

pub use action::{format_action, parse_action, Action, ActionParseError, ToolName};
pub use borough::{build_borough_case, build_region_case};
pub use digest::{digest_results, ResultDigest};
pub use run::{digest_inputs, discover_labels, knowledge_notes, result_label, run_agent, run_naive, AgentConfig, AgentEnv};
pub use trajectory::{
    truncate_observation, AgentOutcome, AgentStep, ArtifactKind, ArtifactRecord, ExecutionOutcome, ExecutionRecord,
    NaiveOutcome, RowsPage, StepStatus, StopReason,
};
