//! Line-oriented interactive front end over [`Engine::handle_query`].

use std::io::{BufRead, Write};
use std::sync::Arc;

use crate::engine::{Engine, EngineError, QueryResponse};
use crate::session::{Mode, Session};

pub const HELP: &str = "Type a question, or one of:\n  :mode naive|agentic  start a new session in that mode\n  :session             show the session id and directory\n  :help                show this help\n  :quit                leave";

pub struct Repl<'a> {
    engine: &'a Engine,
    session: Arc<Session>,
}

/// What the REPL should do after a line.
pub enum Step {
    Continue(String),
    Quit,
}

pub fn render_response(r: &QueryResponse, session: &Session) -> String {
    let mut out = String::new();
    if let Some(sql) = &r.sql {
        out.push_str(&format!("SQL: {sql}\n"));
    }
    out.push_str(r.answer.trim_end());
    out.push('\n');
    for a in &r.artifacts {
        let file = session.dir().join(format!("{}.{}", a.id, a.kind.extension()));
        out.push_str(&format!("[{}] {} -> {}\n", a.kind.extension(), a.title, file.display()));
    }
    out.push_str(&format!(
        "(trajectory {}, planner calls {}, sql generator calls {})",
        r.trajectory_id, r.planner_calls, r.sql_gen_calls
    ));
    out
}

impl<'a> Repl<'a> {
    pub fn new(engine: &'a Engine, mode: Mode) -> Result<Self, EngineError> {
        Ok(Self {
            engine,
            session: engine.create_session(mode)?,
        })
    }

    pub fn session(&self) -> &Arc<Session> {
        &self.session
    }

    pub fn handle_line(&mut self, line: &str) -> Step {
        let line = line.trim();
        if line.is_empty() {
            return Step::Continue(String::new());
        }
        if let Some(cmd) = line.strip_prefix(':') {
            let mut parts = cmd.split_whitespace();
            return match (parts.next(), parts.next()) {
                (Some("quit" | "q" | "exit"), _) => Step::Quit,
                (Some("help"), _) => Step::Continue(HELP.into()),
                (Some("session"), _) => Step::Continue(format!(
                    "session {} ({}) in {}",
                    self.session.id(),
                    self.session.mode().as_str(),
                    self.session.dir().display()
                )),
                (Some("mode"), Some(m)) => match m.parse::<Mode>() {
                    Ok(mode) => match self.engine.create_session(mode) {
                        Ok(s) => {
                            self.session = s;
                            Step::Continue(format!("new {} session {}", mode.as_str(), self.session.id()))
                        }
                        Err(e) => Step::Continue(format!("error: {e}")),
                    },
                    Err(e) => Step::Continue(format!("error: {e}")),
                },
                _ => Step::Continue(format!("unknown command ':{cmd}'\n{HELP}")),
            };
        }
        match self.engine.handle_query(self.session.id(), line) {
            Ok(r) => Step::Continue(render_response(&r, &self.session)),
            Err(e) => Step::Continue(format!("error: {e}")),
        }
    }

    /// Read lines until end of input or `:quit`.
    pub fn run(&mut self, input: impl BufRead, mut output: impl Write) -> std::io::Result<()> {
        writeln!(output, "{} session {}. :help for commands.", self.session.mode().as_str(), self.session.id())?;
        write!(output, "> ")?;
        output.flush()?;
        for line in input.lines() {
            match self.handle_line(&line?) {
                Step::Quit => break,
                Step::Continue(text) => {
                    if !text.is_empty() {
                        writeln!(output, "{text}")?;
                    }
                }
            }
            write!(output, "> ")?;
            output.flush()?;
        }
        writeln!(output)?;
        Ok(())
    }
}
