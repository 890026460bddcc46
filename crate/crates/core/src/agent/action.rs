//! The planner's text protocol: `Thought` / `Action` / `Action Input`, or
//! `Final Answer`.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value as Json};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolName {
    GetDatabaseSchema,
    GenerateSqlQuery,
    ExecuteOnDatabase,
    ReadFile,
    PlotResults,
    MapResults,
    FinalAnswer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamType {
    Str,
    StrList,
    Int,
}

#[derive(Debug, Clone, Copy)]
pub struct Param {
    pub name: &'static str,
    pub ty: ParamType,
    pub required: bool,
}

const fn p(name: &'static str, ty: ParamType, required: bool) -> Param {
    Param { name, ty, required }
}

use ParamType::{Int, Str, StrList};

const SCHEMA_PARAMS: [Param; 1] = [p("table", Str, false)];
const GENERATE_PARAMS: [Param; 5] = [
                p("request", Str, true),
                p("terms", StrList, false),
                p("regions", StrList, false),
                p("windows", StrList, false),
                p("table", Str, false),
            ];
const EXECUTE_PARAMS: [Param; 1] = [p("sql", Str, false)];
const READ_PARAMS: [Param; 3] = [p("result_id", Str, false), p("offset", Int, false), p("limit", Int, false)];
const PLOT_PARAMS: [Param; 6] = [
                p("result_id", Str, false),
                p("kind", Str, false),
                p("x", Str, false),
                p("y", Str, false),
                p("series", Str, false),
                p("title", Str, false),
            ];
const MAP_PARAMS: [Param; 5] = [
                p("result_id", Str, false),
                p("kind", Str, false),
                p("lat", Str, false),
                p("lon", Str, false),
                p("title", Str, false),
            ];
const ANSWER_PARAMS: [Param; 1] = [p("answer", Str, true)];

impl ToolName {
    /// The six callable tools, without `final_answer`.
    pub const TOOLS: [ToolName; 6] = [
        ToolName::GetDatabaseSchema,
        ToolName::GenerateSqlQuery,
        ToolName::ExecuteOnDatabase,
        ToolName::ReadFile,
        ToolName::PlotResults,
        ToolName::MapResults,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ToolName::GetDatabaseSchema => "get_database_schema",
            ToolName::GenerateSqlQuery => "generate_sql_query",
            ToolName::ExecuteOnDatabase => "execute_on_database",
            ToolName::ReadFile => "read_file",
            ToolName::PlotResults => "plot_results",
            ToolName::MapResults => "map_results",
            ToolName::FinalAnswer => "final_answer",
        }
    }

    /// Accepts the bare name and the `_tool`-suffixed form.
    pub fn parse(name: &str) -> Option<Self> {
        let n = name.trim().trim_matches('`').trim().to_ascii_lowercase();
        let n = n.strip_suffix("_tool").unwrap_or(&n);
        Self::TOOLS
            .into_iter()
            .chain([ToolName::FinalAnswer])
            .find(|t| t.as_str() == n)
    }

    pub fn params(self) -> &'static [Param] {
        match self {
            ToolName::GetDatabaseSchema => &SCHEMA_PARAMS,
            ToolName::GenerateSqlQuery => &GENERATE_PARAMS,
            ToolName::ExecuteOnDatabase => &EXECUTE_PARAMS,
            ToolName::ReadFile => &READ_PARAMS,
            ToolName::PlotResults => &PLOT_PARAMS,
            ToolName::MapResults => &MAP_PARAMS,
            ToolName::FinalAnswer => &ANSWER_PARAMS,
        }
    }
}

impl fmt::Display for ToolName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub tool: ToolName,
    pub args: Map<String, Json>,
    #[serde(default)]
    pub thought: String,
    pub raw_text: String,
}

impl Action {
    pub fn str_arg(&self, name: &str) -> Option<&str> {
        self.args.get(name).and_then(Json::as_str)
    }

    pub fn list_arg(&self, name: &str) -> Vec<String> {
        match self.args.get(name) {
            Some(Json::Array(items)) => items.iter().filter_map(|v| v.as_str().map(String::from)).collect(),
            Some(Json::String(s)) => alloc::vec![s.clone()],
            _ => Vec::new(),
        }
    }

    pub fn int_arg(&self, name: &str) -> Option<u64> {
        self.args.get(name).and_then(Json::as_u64)
    }

    pub fn final_answer(answer: &str, thought: &str, raw_text: &str) -> Self {
        let mut args = Map::new();
        args.insert("answer".into(), Json::String(answer.into()));
        Self {
            tool: ToolName::FinalAnswer,
            args,
            thought: thought.into(),
            raw_text: raw_text.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionParseError {
    pub message: String,
    pub thought: String,
}

impl fmt::Display for ActionParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

fn err(message: impl Into<String>, thought: &str) -> ActionParseError {
    ActionParseError {
        message: message.into(),
        thought: thought.into(),
    }
}

/// Byte offset of `marker` at the start of a line, case-insensitive.
fn find_marker(text: &str, marker: &str) -> Option<usize> {
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim_start();
        let lead = line.len() - trimmed.len();
        if trimmed.len() >= marker.len()
            && trimmed.is_char_boundary(marker.len())
            && trimmed[..marker.len()].eq_ignore_ascii_case(marker)
        {
            return Some(offset + lead);
        }
        offset += line.len();
    }
    None
}

fn strip_fence(s: &str) -> &str {
    let s = s.trim_start();
    if let Some(rest) = s.strip_prefix("```") {
        let body = rest.find('\n').map_or("", |i| &rest[i + 1..]);
        return body;
    }
    s
}

fn check_args(tool: ToolName, args: &Map<String, Json>, thought: &str) -> Result<(), ActionParseError> {
    let params = tool.params();
    for key in args.keys() {
        if !params.iter().any(|p| p.name == key) {
            let names: Vec<&str> = params.iter().map(|p| p.name).collect();
            return Err(err(
                format!("{tool} does not take '{key}' (parameters: {})", names.join(", ")),
                thought,
            ));
        }
    }
    for param in params {
        match args.get(param.name) {
            None | Some(Json::Null) if param.required => {
                return Err(err(format!("{tool} requires '{}'", param.name), thought));
            }
            None | Some(Json::Null) => {}
            Some(v) => {
                let ok = match param.ty {
                    Str => v.is_string(),
                    Int => v.is_u64(),
                    StrList => v.is_string() || v.as_array().is_some_and(|a| a.iter().all(Json::is_string)),
                };
                if !ok {
                    let want = match param.ty {
                        Str => "a string",
                        Int => "a non-negative integer",
                        StrList => "a list of strings",
                    };
                    return Err(err(format!("{tool}: '{}' must be {want}", param.name), thought));
                }
            }
        }
    }
    Ok(())
}

/// Parse one planner completion. Prose after the action block is ignored.
pub fn parse_action(completion: &str) -> Result<Action, ActionParseError> {
    let action_at = find_marker(completion, "Action:");
    let final_at = find_marker(completion, "Final Answer:");
    let thought_at = find_marker(completion, "Thought:");
    let block_start = match (action_at, final_at) {
        (Some(a), Some(f)) => a.min(f),
        (Some(a), None) => a,
        (None, Some(f)) => f,
        (None, None) => completion.len(),
    };
    let thought = match thought_at {
        Some(t) if t < block_start => completion[t + "Thought:".len()..block_start].trim(),
        _ => "",
    };

    if let Some(f) = final_at {
        if action_at.is_none_or(|a| f < a) {
            let answer = completion[f + "Final Answer:".len()..].trim();
            if answer.is_empty() {
                return Err(err("Final Answer is empty", thought));
            }
            return Ok(Action::final_answer(answer, thought, completion));
        }
    }
    let Some(a) = action_at else {
        return Err(err("no 'Action:' line or 'Final Answer:' found", thought));
    };
    let rest = &completion[a + "Action:".len()..];
    let name_line = rest.lines().next().unwrap_or("").trim();
    let tool = ToolName::parse(name_line).ok_or_else(|| err(format!("unknown tool '{name_line}'"), thought))?;
    let args = match find_marker(rest, "Action Input:") {
        Some(i) => {
            let input = strip_fence(&rest[i + "Action Input:".len()..]);
            let mut stream = serde_json::Deserializer::from_str(input).into_iter::<Json>();
            match stream.next() {
                Some(Ok(Json::Object(map))) => map,
                Some(Ok(other)) => {
                    return Err(err(
                        format!("Action Input must be a JSON object, got {}", kind_name(&other)),
                        thought,
                    ))
                }
                Some(Err(e)) => return Err(err(format!("Action Input is not valid JSON: {e}"), thought)),
                None => return Err(err("Action Input is empty", thought)),
            }
        }
        None => Map::new(),
    };
    check_args(tool, &args, thought)?;
    Ok(Action {
        tool,
        args,
        thought: thought.to_string(),
        raw_text: completion.to_string(),
    })
}

fn kind_name(v: &Json) -> &'static str {
    match v {
        Json::Null => "null",
        Json::Bool(_) => "a boolean",
        Json::Number(_) => "a number",
        Json::String(_) => "a string",
        Json::Array(_) => "an array",
        Json::Object(_) => "an object",
    }
}

/// Canonical completion text for an action, as used in transcripts and scripts.
pub fn format_action(thought: &str, tool: ToolName, args: &Map<String, Json>) -> String {
    if tool == ToolName::FinalAnswer {
        let answer = args.get("answer").and_then(Json::as_str).unwrap_or("");
        return format!("Thought: {thought}\nFinal Answer: {answer}");
    }
    let input = serde_json::to_string(args).expect("json map serializes");
    format!("Thought: {thought}\nAction: {tool}\nAction Input: {input}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn canonical_form() {
        let a = parse_action("Thought: need columns\nAction: get_database_schema\nAction Input: {}").unwrap();
        assert_eq!(a.tool, ToolName::GetDatabaseSchema);
        assert_eq!(a.thought, "need columns");
        assert!(a.args.is_empty());
    }

    #[test]
    fn final_answer_text() {
        let a = parse_action("Final Answer: Evening exceeded morning by 243 check-ins.").unwrap();
        assert_eq!(a.tool, ToolName::FinalAnswer);
        assert_eq!(a.str_arg("answer"), Some("Evening exceeded morning by 243 check-ins."));
    }

    #[test]
    fn unknown_tool() {
        let e = parse_action("Action: fly_to_moon\nAction Input: {}").unwrap_err();
        assert!(e.message.contains("unknown tool 'fly_to_moon'"));
    }

    #[test]
    fn fenced_json_and_trailing_prose() {
        let text = "Thought: run it\nAction: execute_on_database\nAction Input: ```json\n{\"sql\": \"SELECT 1\"}\n```\nI expect one row.";
        let a = parse_action(text).unwrap();
        assert_eq!(a.str_arg("sql"), Some("SELECT 1"));
        let text = "Action: execute_on_database\nAction Input: {\"sql\": \"SELECT 1\"} then observe";
        assert!(parse_action(text).is_ok());
    }

    #[test]
    fn tool_suffix_accepted() {
        let a = parse_action("Action: get_database_schema_tool\nAction Input: {\"table\": \"checkins_nyc\"}").unwrap();
        assert_eq!(a.str_arg("table"), Some("checkins_nyc"));
    }

    #[test]
    fn argument_checks() {
        let e = parse_action("Action: generate_sql_query\nAction Input: {}").unwrap_err();
        assert!(e.message.contains("requires 'request'"));
        let e = parse_action("Action: read_file\nAction Input: {\"page\": 2}").unwrap_err();
        assert!(e.message.contains("does not take 'page'"));
        let e = parse_action("Action: read_file\nAction Input: {\"offset\": \"x\"}").unwrap_err();
        assert!(e.message.contains("non-negative integer"));
        let e = parse_action("Action: read_file\nAction Input: {\"offset\": 1").unwrap_err();
        assert!(e.message.contains("not valid JSON"));
        let e = parse_action("Action: read_file\nAction Input: [1]").unwrap_err();
        assert!(e.message.contains("JSON object"));
        assert!(parse_action("I think the answer is 4").is_err());
    }

    #[test]
    fn list_args() {
        let a = parse_action(
            "Action: generate_sql_query\nAction Input: {\"request\": \"r\", \"terms\": [\"nightlife\"], \"regions\": \"Brooklyn\"}",
        )
        .unwrap();
        assert_eq!(a.list_arg("terms"), ["nightlife"]);
        assert_eq!(a.list_arg("regions"), ["Brooklyn"]);
    }

    #[test]
    fn format_round_trip() {
        let args = json!({"request": "count rows", "terms": ["gym"]});
        let text = format_action("t", ToolName::GenerateSqlQuery, args.as_object().unwrap());
        let a = parse_action(&text).unwrap();
        assert_eq!(a.tool, ToolName::GenerateSqlQuery);
        assert_eq!(&Json::Object(a.args), &args);
    }
}
