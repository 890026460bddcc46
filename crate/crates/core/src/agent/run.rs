//! The naive single-pass pipeline and the plan-act-observe loop.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use super::action::{parse_action, Action, ToolName};
use super::borough::build_region_case;
use super::digest::{digest_results, ResultDigest};
use super::prompts::{daypart_instruction, naive_prompt, planner_prompt, sqlgen_prompt, summary_prompt, NAIVE_SCHEMA};
use super::trajectory::{
    truncate_observation, AgentOutcome, AgentStep, ArtifactKind, ArtifactRecord, ExecutionOutcome, ExecutionRecord,
    NaiveOutcome, RowsPage, StepStatus, StopReason, OBSERVATION_BUDGET, PREVIEW_ROWS,
};
use crate::knowledge::{rank_labels, BoundingBox, KnowledgeBase, LabelMatch, RegionKind};
use crate::llm::{LlmError, Role};
use crate::schema::SchemaSnapshot;
use crate::sql::{extract_sql, lint_with, parse_statement, LintConfig, Severity, SqlDiagnostic};
use crate::value::{ResultTable, Value};
use crate::viz::{choose_visualization, profile, render_map, render_plot, VisualizationSpec, VizKind};

/// Results included in a summary digest.
pub const DIGEST_RESULTS: usize = 4;

/// Everything the loop needs from the outside world.
pub trait AgentEnv {
    fn complete(&mut self, role: Role, prompt: &str) -> Result<String, LlmError>;
    fn schema(&mut self, table: Option<&str>) -> Result<SchemaSnapshot, String>;
    /// Run a statement that already passed the guard; persists the full result.
    fn execute(&mut self, sql: &str) -> Result<ExecutionOutcome, String>;
    fn read_page(&mut self, result_id: &str, offset: usize, limit: usize) -> Result<RowsPage, String>;
    fn distinct_labels(&mut self, table: &str) -> Result<Vec<String>, String>;
    /// Persist a rendered plot or map and index it.
    fn save_artifact(
        &mut self,
        kind: ArtifactKind,
        title: &str,
        source_result_id: Option<&str>,
        body: &str,
    ) -> Result<ArtifactRecord, String>;
    fn knowledge(&self) -> &KnowledgeBase;
    fn lint_config(&self) -> &LintConfig;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub budget: usize,
    /// Consecutive failed executions tolerated per sub-goal.
    pub max_retries: usize,
    pub max_parse_failures: usize,
    pub observation_budget: usize,
    pub default_table: String,
    pub summarize: bool,
    pub heatmap_grid: usize,
    /// Rows loaded for plots, maps and digests.
    pub viz_row_limit: usize,
    pub read_page_default: usize,
    pub read_page_max: usize,
    /// Labels offered per term by label search.
    pub discovery_limit: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            budget: 12,
            max_retries: 3,
            max_parse_failures: 3,
            observation_budget: OBSERVATION_BUDGET,
            default_table: String::from(crate::DEFAULT_TABLES[0]),
            summarize: true,
            heatmap_grid: crate::viz::DEFAULT_GRID,
            viz_row_limit: 1_000_000,
            read_page_default: 20,
            read_page_max: 100,
            discovery_limit: 8,
        }
    }
}

/// Rank the distinct labels of `table` against `term`.
pub fn discover_labels<E: AgentEnv + ?Sized>(env: &mut E, term: &str, table: &str) -> Result<Vec<LabelMatch>, String> {
    let labels = env.distinct_labels(table)?;
    Ok(rank_labels(term, labels.iter().map(String::as_str)))
}

fn quote_list(labels: &[String]) -> String {
    let quoted: Vec<String> = labels.iter().map(|l| format!("'{}'", l.replace('\'', "''"))).collect();
    quoted.join(", ")
}

fn split_year(window: &str) -> (&str, Option<i32>) {
    let w = window.trim();
    if let Some((name, last)) = w.rsplit_once(' ') {
        if last.len() == 4 {
            if let Ok(y) = last.parse() {
                return (name.trim(), Some(y));
            }
        }
    }
    (w, None)
}

/// Knowledge lines injected into a SQL generation prompt.
pub fn knowledge_notes<E: AgentEnv + ?Sized>(
    env: &mut E,
    terms: &[String],
    regions: &[String],
    windows: &[String],
    table: &str,
    discovery_limit: usize,
) -> Vec<String> {
    let mut notes = Vec::new();
    for term in terms {
        let mapped = env.knowledge().expand_term(term);
        if !mapped.is_empty() {
            notes.push(format!("'{term}' means category_name IN ({})", quote_list(&mapped)));
            continue;
        }
        match discover_labels(env, term, table) {
            Ok(found) if !found.is_empty() => {
                let labels: Vec<String> = found.into_iter().take(discovery_limit).map(|m| m.label).collect();
                notes.push(format!(
                    "no synonym for '{term}'; label search found category_name IN ({})",
                    quote_list(&labels)
                ));
            }
            Ok(_) => notes.push(format!("no category_name label matches '{term}'")),
            Err(e) => notes.push(format!("label search for '{term}' failed: {e}")),
        }
    }

    let mut boxes: Vec<BoundingBox> = Vec::new();
    for region in regions {
        match env.knowledge().lookup_bounds(region) {
            Ok(b) => {
                notes.push(format!("{}: {}", b.name, b.predicate()));
                boxes.push(b.clone());
            }
            Err(_) => notes.push(format!("no stored bounds for '{region}'")),
        }
    }
    if boxes.len() >= 2 {
        let alias = if boxes.iter().all(|b| b.kind == RegionKind::Borough) {
            "borough"
        } else {
            "region"
        };
        let refs: Vec<&BoundingBox> = boxes.iter().collect();
        if let Some(case) = build_region_case(&refs, alias) {
            notes.push(format!("label rows by region with (first match wins):\n{case}"));
        }
    }

    for window in windows {
        let (name, year) = split_year(window);
        let kb = env.knowledge();
        if let Ok(h) = kb.calendar.hour_window(name) {
            notes.push(format!(
                "{} hours: {}",
                h.name,
                h.predicate("EXTRACT(HOUR FROM checkin_time)")
            ));
            continue;
        }
        let years: Vec<i32> = match year {
            Some(y) => alloc::vec![y],
            None => (kb.calendar.years[0]..=kb.calendar.years[1]).collect(),
        };
        let mut found = false;
        for y in years {
            match kb.lookup_window(name, y) {
                Ok(w) => {
                    found = true;
                    notes.push(format!("{} {y}: {}", w.name, w.predicate("checkin_time")));
                }
                Err(e) => {
                    if year.is_some() {
                        found = true;
                        notes.push(format!("{window}: {e}"));
                    }
                }
            }
        }
        if !found {
            notes.push(format!("unknown time window '{window}'"));
        }
    }
    notes
}

fn render_diagnostics(out: &mut String, diags: &[SqlDiagnostic]) {
    for d in diags {
        let sev = match d.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        let _ = write!(out, "- {} {} ({sev}): {}", d.rule_id.as_str(), d.rule_id.name(), d.message);
        if let Some(s) = &d.suggestion {
            let _ = write!(out, " [suggestion: {s}]");
        }
        out.push('\n');
    }
}

fn render_rows(out: &mut String, columns: &[String], rows: &[Vec<Value>]) {
    let _ = writeln!(out, "{}", columns.join(" | "));
    for row in rows {
        let cells: Vec<String> = row.iter().map(Value::to_field).collect();
        let _ = writeln!(out, "{}", cells.join(" | "));
    }
}

/// Executions a summary digests: the last four non-empty ones, or the last
/// execution when every result was empty.
pub fn digest_inputs(executions: &[ExecutionRecord]) -> Vec<&ExecutionRecord> {
    let non_empty: Vec<&ExecutionRecord> = executions.iter().filter(|e| e.row_count > 0).collect();
    let chosen: Vec<&ExecutionRecord> = if non_empty.is_empty() {
        executions.last().into_iter().collect()
    } else {
        non_empty
    };
    let skip = chosen.len().saturating_sub(DIGEST_RESULTS);
    chosen.into_iter().skip(skip).collect()
}

/// Short label for a result, from the tables its SQL reads.
pub fn result_label(sql: &str, fallback: &str) -> String {
    let tables = parse_statement(sql).referenced_tables;
    let nyc = tables.contains("checkins_nyc");
    let tokyo = tables.contains("checkins_tokyo");
    match (nyc, tokyo) {
        (true, false) => "NYC".into(),
        (false, true) => "Tokyo".into(),
        (true, true) => "NYC+Tokyo".into(),
        _ => fallback.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Failure {
    Rejected(Option<String>),
    ExecError,
    Empty,
}

enum Signal {
    Neutral,
    Success,
    Failure(Failure),
}

struct Dispatch {
    observation: String,
    status: StepStatus,
    signal: Signal,
}

impl Dispatch {
    fn ok(observation: String) -> Self {
        Self {
            observation,
            status: StepStatus::Ok,
            signal: Signal::Neutral,
        }
    }

    fn err(observation: String) -> Self {
        Self {
            observation,
            status: StepStatus::ToolError,
            signal: Signal::Neutral,
        }
    }
}

struct Run<'a, E: AgentEnv + ?Sized> {
    env: &'a mut E,
    cfg: &'a AgentConfig,
    question: &'a str,
    steps: Vec<AgentStep>,
    executions: Vec<ExecutionRecord>,
    artifacts: Vec<ArtifactRecord>,
    last_sql: Option<String>,
    last_result: Option<String>,
    sql_gen_calls: u64,
    planner_calls: u64,
    schema: Option<SchemaSnapshot>,
}

impl<E: AgentEnv + ?Sized> Run<'_, E> {
    fn full_schema(&mut self) -> Result<SchemaSnapshot, String> {
        if let Some(s) = &self.schema {
            return Ok(s.clone());
        }
        let s = self.env.schema(None)?;
        self.schema = Some(s.clone());
        Ok(s)
    }

    fn push(&mut self, action: Option<Action>, thought: String, completion: String, observation: String, status: StepStatus) {
        let observation = truncate_observation(&observation, self.cfg.observation_budget);
        self.steps.push(AgentStep {
            index: self.steps.len(),
            thought,
            action,
            completion,
            observation,
            status,
        });
    }

    fn load_table(&mut self, result_id: &str) -> Result<ResultTable, String> {
        let page = self.env.read_page(result_id, 0, self.cfg.viz_row_limit)?;
        Ok(ResultTable::new(page.columns, page.rows))
    }

    fn result_arg(&self, action: &Action) -> Result<String, String> {
        action
            .str_arg("result_id")
            .map(String::from)
            .or_else(|| self.last_result.clone())
            .ok_or_else(|| String::from("no result to use: run execute_on_database first or pass result_id"))
    }

    fn dispatch(&mut self, action: &Action) -> Dispatch {
        match action.tool {
            ToolName::GetDatabaseSchema => {
                let table = action.str_arg("table");
                match self.env.schema(table) {
                    Ok(s) => {
                        if table.is_none() {
                            self.schema = Some(s.clone());
                        }
                        Dispatch::ok(s.render())
                    }
                    Err(e) => Dispatch::err(format!("schema lookup failed: {e}")),
                }
            }
            ToolName::GenerateSqlQuery => self.generate(action),
            ToolName::ExecuteOnDatabase => self.execute(action),
            ToolName::ReadFile => {
                let id = match self.result_arg(action) {
                    Ok(id) => id,
                    Err(e) => return Dispatch::err(e),
                };
                let offset = action.int_arg("offset").unwrap_or(0) as usize;
                let limit = (action.int_arg("limit").unwrap_or(self.cfg.read_page_default as u64) as usize)
                    .min(self.cfg.read_page_max);
                match self.env.read_page(&id, offset, limit) {
                    Ok(page) if page.rows.is_empty() => Dispatch::ok(format!(
                        "No rows at offset {offset}; result {id} has {} rows.",
                        page.total
                    )),
                    Ok(page) => {
                        let mut obs = format!(
                            "Rows {}..{} of {} from {id}:\n",
                            offset,
                            offset + page.rows.len(),
                            page.total
                        );
                        render_rows(&mut obs, &page.columns, &page.rows);
                        Dispatch::ok(obs)
                    }
                    Err(e) => Dispatch::err(format!("read_file failed: {e}")),
                }
            }
            ToolName::PlotResults => self.plot(action),
            ToolName::MapResults => self.map(action),
            ToolName::FinalAnswer => Dispatch::ok(String::new()),
        }
    }

    fn generate(&mut self, action: &Action) -> Dispatch {
        let request = action.str_arg("request").unwrap_or_default().to_string();
        let table = action.str_arg("table").unwrap_or(&self.cfg.default_table).to_string();
        let notes = knowledge_notes(
            self.env,
            &action.list_arg("terms"),
            &action.list_arg("regions"),
            &action.list_arg("windows"),
            &table,
            self.cfg.discovery_limit,
        );
        let schema = self.full_schema().ok();
        let schema_text = schema.as_ref().map_or_else(|| String::from(NAIVE_SCHEMA), SchemaSnapshot::render);
        let prompt = sqlgen_prompt(&request, &schema_text, &notes);
        self.sql_gen_calls += 1;
        let completion = match self.env.complete(Role::SqlGenerator, &prompt) {
            Ok(c) => c,
            Err(e) => return Dispatch::err(format!("SQL generation failed: {e}")),
        };
        let sql = extract_sql(&completion);
        self.last_sql = Some(sql.clone());
        let mut obs = format!("Generated SQL:\n{sql}\n");
        if !notes.is_empty() {
            obs.push_str("Knowledge supplied:\n");
            for n in &notes {
                let _ = writeln!(obs, "- {n}");
            }
        }
        if let Some(schema) = &schema {
            let diags = lint_with(&sql, schema, self.env.lint_config());
            if diags.is_empty() {
                obs.push_str("Check: no issues found.\n");
            } else {
                obs.push_str("Check found:\n");
                render_diagnostics(&mut obs, &diags);
            }
        }
        Dispatch::ok(obs)
    }

    fn execute(&mut self, action: &Action) -> Dispatch {
        let Some(sql) = action.str_arg("sql").map(String::from).or_else(|| self.last_sql.clone()) else {
            return Dispatch::err("no SQL given and none generated yet".into());
        };
        let schema = match self.full_schema() {
            Ok(s) => s,
            Err(e) => return Dispatch::err(format!("schema lookup failed: {e}")),
        };
        let diags = lint_with(&sql, &schema, self.env.lint_config());
        if diags.iter().any(SqlDiagnostic::is_error) {
            let mut obs = String::from("Rejected before execution:\n");
            render_diagnostics(&mut obs, &diags);
            let suggestion = diags.iter().find(|d| d.is_error()).and_then(|d| d.suggestion.clone());
            return Dispatch {
                observation: obs,
                status: StepStatus::ToolError,
                signal: Signal::Failure(Failure::Rejected(suggestion)),
            };
        }
        match self.env.execute(&sql) {
            Err(e) => Dispatch {
                observation: format!("Execution error: {e}\n"),
                status: StepStatus::ToolError,
                signal: Signal::Failure(Failure::ExecError),
            },
            Ok(out) => {
                self.executions.push(ExecutionRecord {
                    step: self.steps.len(),
                    sql: sql.clone(),
                    result_id: out.result_id.clone(),
                    row_count: out.row_count,
                    columns: out.columns.clone(),
                });
                self.artifacts.push(ArtifactRecord {
                    id: out.result_id.clone(),
                    kind: ArtifactKind::Csv,
                    path: out.result_path.clone(),
                    title: String::from("query result"),
                    source_result_id: None,
                });
                self.last_result = Some(out.result_id.clone());
                let mut obs = format!(
                    "result_id: {}\nrows: {}\ncolumns: {}\n",
                    out.result_id,
                    out.row_count,
                    out.columns.join(", ")
                );
                if out.row_count > 0 {
                    let shown = &out.preview[..out.preview.len().min(PREVIEW_ROWS)];
                    let _ = writeln!(obs, "first {} rows:", shown.len());
                    render_rows(&mut obs, &out.columns, shown);
                } else {
                    obs.push_str("The query returned no rows.\n");
                }
                if !diags.is_empty() {
                    obs.push_str("Warnings:\n");
                    render_diagnostics(&mut obs, &diags);
                }
                let signal = if out.row_count == 0 {
                    Signal::Failure(Failure::Empty)
                } else {
                    Signal::Success
                };
                Dispatch {
                    observation: obs,
                    status: StepStatus::Ok,
                    signal,
                }
            }
        }
    }

    fn plot(&mut self, action: &Action) -> Dispatch {
        let id = match self.result_arg(action) {
            Ok(id) => id,
            Err(e) => return Dispatch::err(e),
        };
        let table = match self.load_table(&id) {
            Ok(t) => t,
            Err(e) => return Dispatch::err(format!("plot_results failed: {e}")),
        };
        let kind = match action.str_arg("kind") {
            Some(k) => match VizKind::parse(k) {
                Some(k @ (VizKind::Line | VizKind::Bar)) => k,
                _ => return Dispatch::err(format!("plot kind must be line or bar, got '{k}'")),
            },
            None => match choose_visualization(&profile(&table)) {
                Some(k @ (VizKind::Line | VizKind::Bar)) => k,
                Some(_) => return Dispatch::err("result has coordinates; use map_results".into()),
                None => VizKind::Bar,
            },
        };
        let x = action.str_arg("x").map(String::from).or_else(|| table.columns.first().cloned());
        let y = action.str_arg("y").map(String::from).or_else(|| {
            let xi = x.as_deref().and_then(|x| table.column_index(x));
            (0..table.columns.len())
                .rev()
                .find(|&i| Some(i) != xi && table.numeric_column(i).is_some())
                .map(|i| table.columns[i].clone())
        });
        let title = action.str_arg("title").unwrap_or(self.question).to_string();
        let spec = VisualizationSpec {
            kind,
            x,
            y,
            series: action.str_arg("series").map(String::from),
            lat: None,
            lon: None,
            title: title.clone(),
        };
        let rendered = match render_plot(&spec, &table) {
            Ok(r) => r,
            Err(e) => return Dispatch::err(format!("plot_results failed: {e}")),
        };
        match self.env.save_artifact(ArtifactKind::Plot, &title, Some(&id), &rendered.svg) {
            Ok(rec) => {
                let series: Vec<String> = rendered
                    .series
                    .iter()
                    .map(|(name, n)| {
                        if name.is_empty() {
                            format!("{n} points")
                        } else {
                            format!("{name}: {n} points")
                        }
                    })
                    .collect();
                let obs = format!(
                    "Saved {} plot {} to {} ({}; {} x ticks)",
                    kind.as_str(),
                    rec.id,
                    rec.path,
                    series.join(", "),
                    rendered.ticks
                );
                self.artifacts.push(rec);
                Dispatch::ok(obs)
            }
            Err(e) => Dispatch::err(format!("could not save plot: {e}")),
        }
    }

    fn map(&mut self, action: &Action) -> Dispatch {
        let id = match self.result_arg(action) {
            Ok(id) => id,
            Err(e) => return Dispatch::err(e),
        };
        let table = match self.load_table(&id) {
            Ok(t) => t,
            Err(e) => return Dispatch::err(format!("map_results failed: {e}")),
        };
        let kind = match action.str_arg("kind") {
            Some(k) => match VizKind::parse(k) {
                Some(k @ (VizKind::Points | VizKind::Heatmap)) => k,
                _ => return Dispatch::err(format!("map kind must be points or heatmap, got '{k}'")),
            },
            None if table.row_count() > crate::viz::HEATMAP_MIN_ROWS => VizKind::Heatmap,
            None => VizKind::Points,
        };
        let title = action.str_arg("title").unwrap_or(self.question).to_string();
        let spec = VisualizationSpec {
            kind,
            x: None,
            y: None,
            series: None,
            lat: action.str_arg("lat").map(String::from),
            lon: action.str_arg("lon").map(String::from),
            title: title.clone(),
        };
        let rendered = match render_map(&spec, &table, self.cfg.heatmap_grid) {
            Ok(r) => r,
            Err(e) => return Dispatch::err(format!("map_results failed: {e}")),
        };
        match self.env.save_artifact(ArtifactKind::Map, &title, Some(&id), &rendered.html) {
            Ok(rec) => {
                let mut obs = format!(
                    "Saved {} map {} to {}: {} rows drawn, {} skipped",
                    kind.as_str(),
                    rec.id,
                    rec.path,
                    rendered.accepted,
                    rendered.skipped
                );
                if let Some(grid) = &rendered.grid {
                    let cells = grid.counts.iter().filter(|&&c| c > 0).count();
                    let _ = write!(obs, " in {cells} cells");
                    if let Some((r, c, n)) = grid.hotspot() {
                        let (a, b, x, y) = grid.cell_bounds(r, c);
                        let _ = write!(
                            obs,
                            "; densest cell lat {:.4}..{:.4}, lon {:.4}..{:.4} with {n} rows",
                            a, b, x, y
                        );
                    }
                }
                self.artifacts.push(rec);
                Dispatch::ok(obs)
            }
            Err(e) => Dispatch::err(format!("could not save map: {e}")),
        }
    }

    fn digest(&mut self) -> Option<ResultDigest> {
        let useful: Vec<ExecutionRecord> = digest_inputs(&self.executions).into_iter().cloned().collect();
        if useful.is_empty() {
            return None;
        }
        let mut tables = Vec::new();
        for e in &useful {
            let table = self.load_table(&e.result_id).ok()?;
            tables.push((result_label(&e.sql, &e.result_id), table));
        }
        let refs: Vec<(String, &ResultTable)> = tables.iter().map(|(l, t)| (l.clone(), t)).collect();
        Some(digest_results(&refs))
    }

    fn summarize(&mut self, draft: &str) -> String {
        let Some(digest) = self.digest() else {
            return draft.into();
        };
        let instructions = if digest.is_hourly() {
            daypart_instruction()
        } else if digest.comparison().is_some() {
            String::from("State which side is larger and by how much.")
        } else if digest.is_single_value() {
            String::from("Answer in one sentence.")
        } else {
            String::new()
        };
        let artifacts: Vec<String> = self
            .artifacts
            .iter()
            .filter(|a| a.kind != ArtifactKind::Csv)
            .map(|a| format!("{} {} ({})", a.kind.extension(), a.id, a.path))
            .collect();
        let prompt = summary_prompt(self.question, &digest.text, &artifacts, draft, &instructions);
        let thought = String::from("Summarize the results for the user.");
        match self.env.complete(Role::Planner, &prompt) {
            Ok(completion) => {
                self.planner_calls += 1;
                let answer = match completion.find("Final Answer:") {
                    Some(i) => completion[i + "Final Answer:".len()..].trim(),
                    None => completion.trim(),
                };
                let answer = if answer.is_empty() { draft } else { answer }.to_string();
                let action = Action::final_answer(&answer, &thought, &completion);
                self.push(Some(action), thought, completion, digest.text, StepStatus::Ok);
                answer
            }
            Err(e) => {
                self.planner_calls += 1;
                self.push(None, thought, String::new(), format!("summary call failed: {e}"), StepStatus::ToolError);
                draft.into()
            }
        }
    }

    fn finish(self, answer: String, succeeded: bool, stop_reason: StopReason) -> AgentOutcome {
        AgentOutcome {
            question: self.question.into(),
            answer,
            artifacts: self.artifacts,
            trajectory: self.steps,
            executions: self.executions,
            sql_gen_calls: self.sql_gen_calls,
            planner_calls: self.planner_calls,
            succeeded,
            stop_reason,
        }
    }
}

fn retry_hint(failure: &Failure) -> String {
    match failure {
        Failure::Rejected(Some(s)) => format!("fix the flagged construct ({s}) and regenerate the query."),
        Failure::Rejected(None) => String::from("fix the flagged identifiers or constructs and regenerate the query."),
        Failure::ExecError => String::from("the store rejected the query; correct it using the error message."),
        Failure::Empty => String::from(
            "no rows matched; broaden the filter or run label discovery (pass the user's term in `terms`, \
             or look at SELECT DISTINCT category_name with ILIKE).",
        ),
    }
}

/// Plan, act and observe until a final answer, the step budget, the retry
/// limit or repeated unparseable replies end the run.
pub fn run_agent<E: AgentEnv + ?Sized>(env: &mut E, question: &str, cfg: &AgentConfig) -> AgentOutcome {
    let mut run = Run {
        env,
        cfg,
        question,
        steps: Vec::new(),
        executions: Vec::new(),
        artifacts: Vec::new(),
        last_sql: None,
        last_result: None,
        sql_gen_calls: 0,
        planner_calls: 0,
        schema: None,
    };
    let mut failures = 0usize;
    let mut parse_failures = 0usize;
    loop {
        if run.steps.len() >= cfg.budget {
            let answer = format!("Stopped after {} steps without a final answer.", run.steps.len());
            return run.finish(answer, false, StopReason::BudgetExhausted);
        }
        let prompt = planner_prompt(question, &run.steps);
        run.planner_calls += 1;
        let completion = match run.env.complete(Role::Planner, &prompt) {
            Ok(c) => c,
            Err(e) => {
                let msg = format!("planner call failed: {e}");
                run.push(None, String::new(), String::new(), msg.clone(), StepStatus::ToolError);
                return run.finish(msg, false, StopReason::GatewayError);
            }
        };
        let action = match parse_action(&completion) {
            Ok(a) => a,
            Err(e) => {
                parse_failures += 1;
                let obs = format!(
                    "Could not parse the reply: {}. Answer with Thought/Action/Action Input or Final Answer.",
                    e.message
                );
                run.push(None, e.thought, completion, obs, StepStatus::ParseError);
                if parse_failures >= cfg.max_parse_failures {
                    let answer = format!("Aborted after {parse_failures} unparseable planner replies.");
                    return run.finish(answer, false, StopReason::ParseFailures);
                }
                continue;
            }
        };
        parse_failures = 0;

        if action.tool == ToolName::FinalAnswer {
            let draft = action.str_arg("answer").unwrap_or_default().to_string();
            let thought = action.thought.clone();
            run.push(Some(action), thought, completion, String::new(), StepStatus::Ok);
            let answer = if cfg.summarize && !run.executions.is_empty() && run.steps.len() < cfg.budget {
                run.summarize(&draft)
            } else {
                draft
            };
            return run.finish(answer, true, StopReason::FinalAnswer);
        }

        let mut d = run.dispatch(&action);
        let mut stop = false;
        match &d.signal {
            Signal::Success => failures = 0,
            Signal::Neutral => {}
            Signal::Failure(f) => {
                failures += 1;
                if failures > cfg.max_retries {
                    let _ = write!(
                        d.observation,
                        "\nRetry limit reached ({failures} consecutive failures); stopping."
                    );
                    stop = true;
                } else {
                    let _ = write!(
                        d.observation,
                        "\nRetry {failures} of {}: {}",
                        cfg.max_retries,
                        retry_hint(f)
                    );
                }
            }
        }
        let thought = action.thought.clone();
        run.push(Some(action), thought, completion, d.observation, d.status);
        if stop {
            let answer = String::from("Could not complete the query within the retry limit.");
            return run.finish(answer, false, StopReason::RetryLimit);
        }
    }
}

/// One generation call, then the SQL runs verbatim: no checks, no retry.
pub fn run_naive<E: AgentEnv + ?Sized>(env: &mut E, question: &str) -> NaiveOutcome {
    let prompt = naive_prompt(question);
    let (sql, execution) = match env.complete(Role::SqlGenerator, &prompt) {
        Ok(completion) => {
            let sql = extract_sql(&completion);
            let execution = env.execute(&sql);
            (sql, execution)
        }
        Err(e) => (String::new(), Err(format!("SQL generation failed: {e}"))),
    };
    NaiveOutcome {
        question: question.into(),
        sql,
        execution,
        sql_gen_calls: 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{ColumnSchema, TableSchema};
    use alloc::collections::VecDeque;
    use alloc::vec;
    use std::collections::BTreeMap;

    struct Mock {
        planner: VecDeque<String>,
        sqlgen: VecDeque<String>,
        results: BTreeMap<String, ResultTable>,
        labels: Vec<String>,
        kb: KnowledgeBase,
        lint: LintConfig,
        executed: Vec<String>,
        prompts: Vec<(Role, String)>,
        saved: Vec<ArtifactRecord>,
        tables: BTreeMap<String, ResultTable>,
        fail_sql: Option<String>,
    }

    impl Mock {
        fn new(planner: &[&str], sqlgen: &[&str]) -> Self {
            Self {
                planner: planner.iter().map(|s| s.to_string()).collect(),
                sqlgen: sqlgen.iter().map(|s| s.to_string()).collect(),
                results: BTreeMap::new(),
                labels: vec!["Laundry Service".into(), "Bar".into(), "Pizza Place".into()],
                kb: KnowledgeBase::builtin(),
                lint: LintConfig::default(),
                executed: Vec::new(),
                prompts: Vec::new(),
                saved: Vec::new(),
                tables: BTreeMap::new(),
                fail_sql: None,
            }
        }

        fn with_result(mut self, sql: &str, table: ResultTable) -> Self {
            self.results.insert(sql.into(), table);
            self
        }
    }

    fn schema() -> SchemaSnapshot {
        let cols = [
            ("user_id", "INTEGER"),
            ("venue_id", "TEXT"),
            ("category_id", "TEXT"),
            ("category_name", "TEXT"),
            ("latitude", "REAL"),
            ("longitude", "REAL"),
            ("timezone_offset", "INTEGER"),
            ("checkin_time", "TIMESTAMP"),
        ];
        let table = |name: &str| TableSchema {
            name: name.into(),
            columns: cols
                .iter()
                .map(|(n, t)| ColumnSchema {
                    name: (*n).into(),
                    column_type: (*t).into(),
                })
                .collect(),
            samples: Vec::new(),
        };
        SchemaSnapshot {
            tables: vec![table("checkins_nyc"), table("checkins_tokyo")],
        }
    }

    impl AgentEnv for Mock {
        fn complete(&mut self, role: Role, prompt: &str) -> Result<String, LlmError> {
            self.prompts.push((role, prompt.into()));
            let queue = match role {
                Role::Planner => &mut self.planner,
                Role::SqlGenerator => &mut self.sqlgen,
            };
            queue.pop_front().ok_or(LlmError::Exhausted {
                session: "mock".into(),
                step: 0,
            })
        }

        fn schema(&mut self, table: Option<&str>) -> Result<SchemaSnapshot, String> {
            let s = schema();
            match table {
                None => Ok(s),
                Some(t) => s
                    .table(t)
                    .cloned()
                    .map(|t| SchemaSnapshot { tables: vec![t] })
                    .ok_or_else(|| format!("unknown table {t}")),
            }
        }

        fn execute(&mut self, sql: &str) -> Result<ExecutionOutcome, String> {
            self.executed.push(sql.into());
            if self.fail_sql.as_deref() == Some(sql) {
                return Err("no such column: foo".into());
            }
            let table = self.results.get(sql).cloned().unwrap_or_else(|| ResultTable::new(vec!["n".into()], vec![]));
            let id = format!("r{}", self.executed.len());
            let out = ExecutionOutcome {
                result_id: id.clone(),
                row_count: table.row_count(),
                columns: table.columns.clone(),
                preview: table.rows.iter().take(PREVIEW_ROWS).cloned().collect(),
                result_path: format!("/tmp/{id}.csv"),
            };
            self.tables.insert(id, table);
            Ok(out)
        }

        fn read_page(&mut self, result_id: &str, offset: usize, limit: usize) -> Result<RowsPage, String> {
            let t = self.tables.get(result_id).ok_or("unknown result")?;
            Ok(RowsPage {
                result_id: result_id.into(),
                offset,
                total: t.row_count(),
                columns: t.columns.clone(),
                rows: t.rows.iter().skip(offset).take(limit).cloned().collect(),
            })
        }

        fn distinct_labels(&mut self, _table: &str) -> Result<Vec<String>, String> {
            Ok(self.labels.clone())
        }

        fn save_artifact(
            &mut self,
            kind: ArtifactKind,
            title: &str,
            source_result_id: Option<&str>,
            _body: &str,
        ) -> Result<ArtifactRecord, String> {
            let id = format!("a{}", self.saved.len() + 1);
            let rec = ArtifactRecord {
                id: id.clone(),
                kind,
                path: format!("/tmp/{id}.{}", kind.extension()),
                title: title.into(),
                source_result_id: source_result_id.map(String::from),
            };
            self.saved.push(rec.clone());
            Ok(rec)
        }

        fn knowledge(&self) -> &KnowledgeBase {
            &self.kb
        }

        fn lint_config(&self) -> &LintConfig {
            &self.lint
        }
    }

    fn act(tool: &str, input: &str) -> String {
        format!("Thought: next step\nAction: {tool}\nAction Input: {input}")
    }

    fn scalar(n: i64) -> ResultTable {
        ResultTable::new(vec!["n".into()], vec![vec![Value::Integer(n)]])
    }

    const COUNT: &str = "SELECT COUNT(*) AS n FROM checkins_nyc";

    #[test]
    fn budget_of_one_stops_after_one_step() {
        let mut env = Mock::new(&[&act("get_database_schema", "{}")], &[]);
        let cfg = AgentConfig {
            budget: 1,
            ..AgentConfig::default()
        };
        let out = run_agent(&mut env, "q", &cfg);
        assert_eq!(out.trajectory.len(), 1);
        assert!(!out.succeeded);
        assert_eq!(out.stop_reason, StopReason::BudgetExhausted);
        assert_eq!(out.planner_calls, 1);
    }

    #[test]
    fn simple_count_then_answer() {
        let planner = [
            act("generate_sql_query", r#"{"request": "count NYC check-ins"}"#),
            act("execute_on_database", "{}"),
            String::from("Thought: done\nFinal Answer: 42 check-ins"),
            String::from("Final Answer: NYC has 42 check-ins."),
        ];
        let refs: Vec<&str> = planner.iter().map(String::as_str).collect();
        let mut env = Mock::new(&refs, &[COUNT]).with_result(COUNT, scalar(42));
        let out = run_agent(&mut env, "How many check-ins in NYC?", &AgentConfig::default());
        assert!(out.succeeded);
        assert_eq!(out.stop_reason, StopReason::FinalAnswer);
        assert_eq!(out.answer, "NYC has 42 check-ins.");
        assert_eq!(out.sql_gen_calls, 1);
        assert_eq!(out.planner_calls, 4);
        assert_eq!(out.trajectory.len(), 4);
        assert_eq!(env.executed, vec![COUNT.to_string()]);
        assert_eq!(out.executions.len(), 1);
        assert_eq!(out.artifacts[0].kind, ArtifactKind::Csv);
        assert!(out.trajectory[1].observation.contains("rows: 1"));
    }

    #[test]
    fn no_summary_without_executions() {
        let mut env = Mock::new(&["Final Answer: nothing to query"], &[]);
        let out = run_agent(&mut env, "hi", &AgentConfig::default());
        assert!(out.succeeded);
        assert_eq!(out.answer, "nothing to query");
        assert_eq!(out.planner_calls, 1);
    }

    #[test]
    fn geodesic_query_rejected_before_execution() {
        let bad = "SELECT COUNT(*) FROM checkins_nyc WHERE ST_DWithin(latitude, longitude, 500)";
        let planner = [
            act("execute_on_database", &serde_json::json!({ "sql": bad }).to_string()),
            String::from("Final Answer: gave up"),
        ];
        let refs: Vec<&str> = planner.iter().map(String::as_str).collect();
        let mut env = Mock::new(&refs, &[]);
        let out = run_agent(&mut env, "q", &AgentConfig::default());
        assert!(env.executed.is_empty());
        assert_eq!(out.trajectory[0].status, StepStatus::ToolError);
        assert!(out.trajectory[0].observation.contains("R4"));
        assert!(out.trajectory[0].observation.contains("bounding box"));
        assert!(out.trajectory[0].observation.contains("Retry 1 of 3"));
    }

    #[test]
    fn retry_limit_stops_the_run() {
        let empty = "SELECT COUNT(*) AS n FROM checkins_nyc WHERE category_name = 'Nope'";
        let step = act("execute_on_database", &serde_json::json!({ "sql": empty }).to_string());
        let planner = vec![step.as_str(); 10];
        let mut env = Mock::new(&planner, &[])
            .with_result(empty, ResultTable::new(vec!["n".into()], vec![]));
        let out = run_agent(&mut env, "q", &AgentConfig::default());
        assert!(!out.succeeded);
        assert_eq!(out.stop_reason, StopReason::RetryLimit);
        assert_eq!(out.trajectory.len(), 4);
        assert_eq!(env.executed.len(), 4);
        assert!(out.trajectory[0].observation.contains("label discovery"));
    }

    #[test]
    fn success_resets_failure_count() {
        let fail = "SELECT foo FROM checkins_nyc";
        let planner_owned = [
            act("execute_on_database", &serde_json::json!({ "sql": fail }).to_string()),
            act("execute_on_database", &serde_json::json!({ "sql": fail }).to_string()),
            act("execute_on_database", &serde_json::json!({ "sql": fail }).to_string()),
            act("execute_on_database", &serde_json::json!({ "sql": COUNT }).to_string()),
            act("execute_on_database", &serde_json::json!({ "sql": fail }).to_string()),
            String::from("Final Answer: ok"),
            String::from("Final Answer: summary"),
        ];
        let refs: Vec<&str> = planner_owned.iter().map(String::as_str).collect();
        let mut env = Mock::new(&refs, &[]).with_result(COUNT, scalar(1));
        let out = run_agent(&mut env, "q", &AgentConfig::default());
        assert!(out.succeeded, "{:?}", out.stop_reason);
        assert!(out.trajectory[4].observation.contains("Retry 1 of 3"));
    }

    #[test]
    fn repeated_parse_failures_abort() {
        let mut env = Mock::new(&["hmm", "still thinking", "no idea", "Final Answer: x"], &[]);
        let out = run_agent(&mut env, "q", &AgentConfig::default());
        assert_eq!(out.stop_reason, StopReason::ParseFailures);
        assert_eq!(out.trajectory.len(), 3);
        assert!(out.trajectory.iter().all(|s| s.status == StepStatus::ParseError));
    }

    #[test]
    fn parse_failure_then_recovery() {
        let mut env = Mock::new(&["hmm", "Final Answer: fine"], &[]);
        let out = run_agent(&mut env, "q", &AgentConfig::default());
        assert!(out.succeeded);
        assert_eq!(out.trajectory[0].status, StepStatus::ParseError);
    }

    #[test]
    fn gateway_error_stops() {
        let mut env = Mock::new(&[], &[]);
        let out = run_agent(&mut env, "q", &AgentConfig::default());
        assert_eq!(out.stop_reason, StopReason::GatewayError);
        assert!(!out.succeeded);
        assert_eq!(out.trajectory.len(), 1);
    }

    #[test]
    fn knowledge_injected_into_generator_prompt() {
        let input = serde_json::json!({
            "request": "count nightlife check-ins in Manhattan and Brooklyn on Thanksgiving 2012",
            "terms": ["nightlife", "laundromat"],
            "regions": ["Manhattan", "Brooklyn"],
            "windows": ["thanksgiving 2012"],
        });
        let planner = [act("generate_sql_query", &input.to_string())];
        let refs: Vec<&str> = planner.iter().map(String::as_str).collect();
        let mut env = Mock::new(&refs, &[COUNT]);
        let cfg = AgentConfig {
            budget: 1,
            ..AgentConfig::default()
        };
        run_agent(&mut env, "q", &cfg);
        let (role, prompt) = env.prompts.iter().find(|(r, _)| *r == Role::SqlGenerator).unwrap();
        assert_eq!(*role, Role::SqlGenerator);
        assert!(prompt.contains("'Nightclub'"), "{prompt}");
        assert!(prompt.contains("'Laundry Service'"));
        assert!(prompt.contains("latitude BETWEEN"));
        assert!(prompt.contains("END AS borough"));
        assert!(prompt.contains("checkin_time >= '2012-11-22 00:00:00'"));
    }

    #[test]
    fn plot_and_map_save_artifacts() {
        let hourly = "SELECT EXTRACT(HOUR FROM checkin_time) AS hour, COUNT(*) AS n FROM checkins_nyc GROUP BY 1";
        let points = "SELECT latitude, longitude FROM checkins_nyc LIMIT 3";
        let hourly_rows = (0..24).map(|h| vec![Value::Integer(h), Value::Integer(10 + h)]).collect();
        let point_rows = vec![
            vec![Value::Real(40.7), Value::Real(-73.9)],
            vec![Value::Real(40.8), Value::Real(-73.95)],
            vec![Value::Text("x".into()), Value::Real(-73.9)],
        ];
        let planner = [
            act("execute_on_database", &serde_json::json!({ "sql": hourly }).to_string()),
            act("plot_results", "{}"),
            act("execute_on_database", &serde_json::json!({ "sql": points }).to_string()),
            act("map_results", "{}"),
            String::from("Final Answer: see artifacts"),
            String::from("Final Answer: Peak at 23h."),
        ];
        let refs: Vec<&str> = planner.iter().map(String::as_str).collect();
        let mut env = Mock::new(&refs, &[])
            .with_result(hourly, ResultTable::new(vec!["hour".into(), "n".into()], hourly_rows))
            .with_result(points, ResultTable::new(vec!["latitude".into(), "longitude".into()], point_rows));
        let out = run_agent(&mut env, "q", &AgentConfig::default());
        assert!(out.succeeded);
        let kinds: Vec<ArtifactKind> = out.artifacts.iter().map(|a| a.kind).collect();
        assert_eq!(
            kinds,
            vec![ArtifactKind::Csv, ArtifactKind::Plot, ArtifactKind::Csv, ArtifactKind::Map]
        );
        assert!(out.trajectory[1].observation.contains("line plot"), "{}", out.trajectory[1].observation);
        assert!(out.trajectory[1].observation.contains("24 points"));
        assert!(out.trajectory[3].observation.contains("2 rows drawn, 1 skipped"));
        let summary_prompt = &env.prompts.last().unwrap().1;
        assert!(summary_prompt.contains("Late Night"));
    }

    #[test]
    fn naive_runs_once_verbatim() {
        let mut env = Mock::new(&[], &["```sql\nSELECT COUNT(*) AS n FROM checkins_nyc\n```"]).with_result(COUNT, scalar(7));
        let out = run_naive(&mut env, "How many?");
        assert_eq!(out.sql_gen_calls, 1);
        assert_eq!(env.prompts.len(), 1);
        assert_eq!(env.executed, vec![COUNT.to_string()]);
        assert_eq!(out.preview(), &[vec![Value::Integer(7)]]);
    }

    #[test]
    fn naive_does_not_guard() {
        let bad = "SELECT foo FROM checkins_nyc";
        let mut env = Mock::new(&[], &[bad]);
        env.fail_sql = Some(bad.into());
        let out = run_naive(&mut env, "q");
        assert_eq!(env.executed.len(), 1);
        assert!(out.execution.is_err());
    }

    #[test]
    fn window_years_default_to_configured_range() {
        let mut env = Mock::new(&[], &[]);
        let notes = knowledge_notes(&mut env, &[], &[], &["new year's eve".into()], "checkins_nyc", 8);
        assert_eq!(notes.len(), 2);
        assert!(notes[0].contains("2012-12-31 00:00:00"));
        let late = knowledge_notes(&mut env, &[], &[], &["late night".into()], "checkins_nyc", 8);
        assert_eq!(late.len(), 1, "{late:?}");
        let unknown = knowledge_notes(&mut env, &["zzzz".into()], &["Atlantis".into()], &["festivus".into()], "t", 8);
        assert_eq!(unknown.len(), 3);
    }

    #[test]
    fn result_labels_follow_tables() {
        assert_eq!(result_label(COUNT, "r1"), "NYC");
        assert_eq!(result_label("SELECT COUNT(*) FROM checkins_tokyo", "r1"), "Tokyo");
        assert_eq!(result_label("SELECT 1", "r1"), "r1");
    }
}
