//! Tolerant structural analysis of a single SQL statement.
//!
//! This is not a grammar. It walks the token stream once, tracking a stack of
//! parenthesis frames and the clause each frame is in, and records what the
//! lint rules need: table and column references, function calls, aliases,
//! UNION branch widths and literal equality filters, all with byte spans.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use serde::{Deserialize, Serialize};

use super::lexer::{self, Token, TokenKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StatementKind {
    Select,
    Other,
}

/// What the lint rules see of a statement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatementSummary {
    pub statement_kind: StatementKind,
    pub referenced_tables: BTreeSet<String>,
    /// `(qualifier, column)`; unqualified columns use `"."` as qualifier.
    pub referenced_columns: BTreeSet<(String, String)>,
    pub called_functions: BTreeSet<String>,
    pub has_union: bool,
    pub has_cte: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableRef {
    pub name: String,
    pub alias: Option<String>,
    pub span: Range<usize>,
    pub block: Option<usize>,
    /// Refers to a CTE defined in the statement rather than a stored table.
    pub is_cte: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnRef {
    pub qualifier: Option<String>,
    pub name: String,
    pub span: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionCall {
    pub name: String,
    /// From the first byte of the name to the closing parenthesis, inclusive.
    pub span: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LiteralFilter {
    pub column: String,
    pub literal: String,
    pub span: Range<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SelectBlock {
    pub items: usize,
    pub star: bool,
    pub tables: Vec<String>,
    pub span_start: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseFailure {
    pub message: String,
    pub span: Range<usize>,
}

/// Full analysis with spans; [`StatementSummary`] is derived from it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Analysis {
    pub kind: StatementKind,
    pub failure: Option<ParseFailure>,
    pub tables: Vec<TableRef>,
    pub columns: Vec<ColumnRef>,
    pub functions: Vec<FunctionCall>,
    pub aliases: BTreeSet<String>,
    pub cte_names: BTreeSet<String>,
    pub blocks: Vec<SelectBlock>,
    /// Each group lists the blocks joined by UNION/INTERSECT/EXCEPT at one level.
    pub union_groups: Vec<Vec<usize>>,
    pub literal_filters: Vec<LiteralFilter>,
    pub write_keyword: Option<(String, Range<usize>)>,
    pub has_union: bool,
    pub has_cte: bool,
}

impl Analysis {
    pub fn summary(&self) -> StatementSummary {
        StatementSummary {
            statement_kind: self.kind,
            referenced_tables: self
                .tables
                .iter()
                .filter(|t| !t.is_cte)
                .map(|t| t.name.clone())
                .collect(),
            referenced_columns: self
                .columns
                .iter()
                .map(|c| {
                    (
                        c.qualifier.clone().unwrap_or_else(|| ".".to_string()),
                        c.name.clone(),
                    )
                })
                .collect(),
            called_functions: self.functions.iter().map(|f| f.name.clone()).collect(),
            has_union: self.has_union,
            has_cte: self.has_cte,
        }
    }
}

/// Summarize `sql`. Unparseable input yields `kind = Other`, never a panic.
pub fn parse_statement(sql: &str) -> StatementSummary {
    analyze(sql).summary()
}

const KEYWORDS: &[&str] = &[
    "select", "from", "where", "group", "by", "having", "order", "limit", "offset", "as", "and",
    "or", "not", "in", "is", "null", "like", "ilike", "between", "case", "when", "then", "else",
    "end", "join", "left", "right", "inner", "outer", "full", "cross", "natural", "on", "using",
    "union", "intersect", "except", "all", "distinct", "with", "recursive", "asc", "desc", "nulls",
    "first", "last", "exists", "true", "false", "interval", "extract", "cast", "over",
    "partition", "rows", "range", "any", "some", "fetch", "next", "only", "row", "filter",
    "within", "lateral", "escape", "current_date", "current_time", "current_timestamp",
    "localtime", "localtimestamp", "similar", "window",
];

const WRITE_KEYWORDS: &[&str] = &[
    "insert", "update", "delete", "drop", "create", "alter", "truncate", "replace", "merge",
    "grant", "revoke", "attach", "detach", "pragma", "vacuum", "copy", "call", "execute", "exec",
    "set", "lock", "comment", "reindex", "analyze", "into", "begin", "commit", "rollback",
    "savepoint", "release", "upsert", "load", "install",
];

const LITERAL_PREFIXES: &[&str] = &["date", "timestamp", "time", "timestamptz"];

fn is_keyword(name: &str) -> bool {
    KEYWORDS.contains(&name)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Clause {
    None,
    With,
    Select,
    From,
    On,
    Where,
    GroupBy,
    Having,
    OrderBy,
    Limit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FrameKind {
    Root,
    Paren,
    Call(usize),
    Extract,
    Cast,
    InList,
    Using,
    CteColumns,
    CteBody,
}

#[derive(Debug, Clone)]
struct Frame {
    kind: FrameKind,
    clause: Clause,
    block: Option<usize>,
    expect_table: bool,
    after_table: bool,
    expect_cte_name: bool,
    pending_union: bool,
    union_blocks: Vec<usize>,
    in_column: Option<String>,
    seen_field: bool,
    open_span: usize,
}

impl Frame {
    fn new(kind: FrameKind, open_span: usize) -> Self {
        Self {
            kind,
            clause: Clause::None,
            block: None,
            expect_table: false,
            after_table: false,
            expect_cte_name: false,
            pending_union: false,
            union_blocks: Vec::new(),
            in_column: None,
            seen_field: false,
            open_span,
        }
    }
}

/// Analyze `sql` into an [`Analysis`].
pub fn analyze(sql: &str) -> Analysis {
    let mut out = Analysis {
        kind: StatementKind::Other,
        failure: None,
        tables: Vec::new(),
        columns: Vec::new(),
        functions: Vec::new(),
        aliases: BTreeSet::new(),
        cte_names: BTreeSet::new(),
        blocks: Vec::new(),
        union_groups: Vec::new(),
        literal_filters: Vec::new(),
        write_keyword: None,
        has_union: false,
        has_cte: false,
    };
    let tokens = match lexer::tokenize(sql) {
        Ok(t) => t,
        Err(e) => {
            out.failure = Some(ParseFailure {
                message: e.message.to_string(),
                span: e.span,
            });
            return out;
        }
    };
    let sig: Vec<&Token> = tokens.iter().filter(|t| !t.is_trivia()).collect();
    if sig.is_empty() {
        out.failure = Some(ParseFailure {
            message: "empty statement".to_string(),
            span: 0..sql.len(),
        });
        return out;
    }

    // A single trailing semicolon is allowed; anything after it is a second statement.
    let mut end = sig.len();
    if let Some(pos) = sig.iter().position(|t| t.is_symbol(sql, ";")) {
        if pos + 1 < sig.len() {
            out.failure = Some(ParseFailure {
                message: "multiple statements are not allowed".to_string(),
                span: sig[pos].span.start..sql.len(),
            });
            return out;
        }
        end = pos;
    }
    let sig = &sig[..end];
    if sig.is_empty() {
        out.failure = Some(ParseFailure {
            message: "empty statement".to_string(),
            span: 0..sql.len(),
        });
        return out;
    }

    Walker {
        src: sql,
        sig,
        out: &mut out,
        stack: vec![Frame::new(FrameKind::Root, 0)],
        cte_columns: BTreeMap::new(),
    }
    .run();

    if out.failure.is_none() && out.write_keyword.is_none() {
        let first = sig
            .iter()
            .find(|t| !t.is_symbol(sql, "("))
            .map(|t| t.text(sql).to_ascii_lowercase());
        if matches!(first.as_deref(), Some("select") | Some("with")) && !out.blocks.is_empty() {
            out.kind = StatementKind::Select;
        }
    }
    out
}

struct Walker<'a, 'o> {
    src: &'a str,
    sig: &'a [&'a Token],
    out: &'o mut Analysis,
    stack: Vec<Frame>,
    cte_columns: BTreeMap<String, Vec<String>>,
}

impl<'a, 'o> Walker<'a, 'o> {
    fn frame(&mut self) -> &mut Frame {
        self.stack.last_mut().expect("root frame")
    }

    fn is_sym(&self, i: usize, s: &str) -> bool {
        self.sig.get(i).is_some_and(|t| t.is_symbol(self.src, s))
    }

    fn is_kw(&self, i: usize, kw: &str) -> bool {
        self.sig.get(i).is_some_and(|t| t.is_keyword(self.src, kw))
    }

    fn prev_is_alias_anchor(&self, i: usize) -> bool {
        if i == 0 {
            return false;
        }
        let p = self.sig[i - 1];
        match p.kind {
            TokenKind::Ident => {
                let t = p.text(self.src).to_ascii_lowercase();
                t == "end" || !is_keyword(&t)
            }
            TokenKind::QuotedIdent | TokenKind::String | TokenKind::Number => true,
            TokenKind::Symbol => p.text(self.src) == ")",
            _ => false,
        }
    }

    fn fail(&mut self, message: &str, span: Range<usize>) {
        if self.out.failure.is_none() {
            self.out.failure = Some(ParseFailure {
                message: message.to_string(),
                span,
            });
        }
    }

    fn start_block(&mut self, span_start: usize) {
        let id = self.out.blocks.len();
        self.out.blocks.push(SelectBlock {
            items: 1,
            span_start,
            ..SelectBlock::default()
        });
        let f = self.frame();
        f.block = Some(id);
        f.clause = Clause::Select;
        if f.pending_union {
            f.pending_union = false;
            f.union_blocks.push(id);
        } else {
            if f.union_blocks.len() > 1 {
                let group = core::mem::take(&mut f.union_blocks);
                self.out.union_groups.push(group);
            }
            let f = self.frame();
            f.union_blocks = vec![id];
        }
    }

    fn close_frame(&mut self, frame: Frame) {
        if frame.union_blocks.len() > 1 {
            self.out.union_groups.push(frame.union_blocks);
        }
    }

    fn add_table(&mut self, i: usize) -> usize {
        // schema-qualified names: keep the last segment
        let mut j = i;
        let mut name = self.sig[j].ident_name(self.src);
        let start = self.sig[j].span.start;
        while self.is_sym(j + 1, ".") && self.sig.get(j + 2).is_some() {
            j += 2;
            name = self.sig[j].ident_name(self.src);
        }
        let is_cte = self.out.cte_names.contains(&name);
        let block = self.frame().block;
        if !is_cte {
            if let Some(b) = block {
                let tables = &mut self.out.blocks[b].tables;
                if !tables.contains(&name) {
                    tables.push(name.clone());
                }
            }
        }
        self.out.tables.push(TableRef {
            name,
            alias: None,
            span: start..self.sig[j].span.end,
            block,
            is_cte,
        });
        j
    }

    fn run(mut self) {
        let n = self.sig.len();
        let mut i = 0;
        while i < n {
            let tok = self.sig[i];
            let text = tok.text(self.src);
            match tok.kind {
                TokenKind::Symbol => self.symbol(i, text),
                TokenKind::String => self.string_literal(i),
                TokenKind::Number => {}
                TokenKind::Ident | TokenKind::QuotedIdent => {
                    i = self.identifier(i);
                }
                TokenKind::Whitespace | TokenKind::Comment => {}
            }
            i += 1;
        }
        if self.stack.len() > 1 {
            let open = self.stack.last().map_or(0, |f| f.open_span);
            self.fail("unbalanced parenthesis", open..self.src.len());
        }
        while let Some(f) = self.stack.pop() {
            self.close_frame(f);
        }
    }

    fn symbol(&mut self, i: usize, text: &str) {
        match text {
            "(" => {
                let span = self.sig[i].span.start;
                let prev = if i > 0 { Some(self.sig[i - 1]) } else { None };
                let prev_lower = prev.map(|p| p.text(self.src).to_ascii_lowercase());
                let clause = self.frame().clause;
                let kind = match (prev, prev_lower.as_deref()) {
                    (Some(_), Some("extract")) => FrameKind::Extract,
                    (Some(_), Some("cast")) => FrameKind::Cast,
                    (Some(_), Some("in")) => FrameKind::InList,
                    (Some(_), Some("using")) if clause == Clause::From || clause == Clause::On => {
                        FrameKind::Using
                    }
                    (Some(p), Some(name))
                        if p.kind == TokenKind::Ident
                            && !is_keyword(name)
                            && self.frame().clause != Clause::With
                            && !(self.frame().expect_table) =>
                    {
                        let idx = self.out.functions.len();
                        self.out.functions.push(FunctionCall {
                            name: name.to_string(),
                            span: p.span.start..p.span.end,
                        });
                        FrameKind::Call(idx)
                    }
                    (Some(p), _)
                        if self.frame().clause == Clause::With
                            && matches!(p.kind, TokenKind::Ident | TokenKind::QuotedIdent)
                            && !p.is_keyword(self.src, "as") =>
                    {
                        FrameKind::CteColumns
                    }
                    (Some(p), _)
                        if self.frame().clause == Clause::With && p.is_keyword(self.src, "as") =>
                    {
                        FrameKind::CteBody
                    }
                    _ => FrameKind::Paren,
                };
                let mut frame = Frame::new(kind, span);
                if kind == FrameKind::InList {
                    frame.in_column = self.in_list_column(i);
                }
                if self.frame().clause == Clause::From && self.frame().expect_table {
                    self.frame().expect_table = false;
                }
                self.stack.push(frame);
            }
            ")" => {
                if self.stack.len() <= 1 {
                    self.fail("unbalanced parenthesis", self.sig[i].span.clone());
                    return;
                }
                let frame = self.stack.pop().expect("checked");
                if let FrameKind::Call(idx) = frame.kind {
                    self.out.functions[idx].span.end = self.sig[i].span.end;
                }
                let was_subquery = frame.block.is_some();
                let kind = frame.kind;
                self.close_frame(frame);
                let parent = self.frame();
                if kind == FrameKind::CteBody {
                    parent.clause = Clause::With;
                    parent.expect_cte_name = false;
                } else if parent.clause == Clause::From && was_subquery {
                    parent.after_table = true;
                }
            }
            "," => {
                let f = self.frame();
                match f.clause {
                    Clause::Select => {
                        if let Some(b) = f.block {
                            self.out.blocks[b].items += 1;
                        }
                    }
                    Clause::From => {
                        f.expect_table = true;
                        f.after_table = false;
                    }
                    Clause::With => f.expect_cte_name = true,
                    _ => {}
                }
            }
            "*" => {
                let f = self.frame();
                if f.clause == Clause::Select {
                    let anchor = i == 0
                        || self.is_sym(i - 1, ",")
                        || self.is_sym(i - 1, ".")
                        || self.is_kw(i - 1, "select")
                        || self.is_kw(i - 1, "distinct")
                        || self.is_kw(i - 1, "all");
                    if anchor {
                        if let Some(b) = self.frame().block {
                            self.out.blocks[b].star = true;
                        }
                    }
                }
            }
            _ => {}
        }
    }

    fn in_list_column(&self, open: usize) -> Option<String> {
        // `<col> IN (` ; `NOT IN` is an exclusion and not tracked
        if open < 2 {
            return None;
        }
        let col = self.sig[open - 2];
        if col.is_keyword(self.src, "not") {
            return None;
        }
        matches!(col.kind, TokenKind::Ident | TokenKind::QuotedIdent).then(|| col.ident_name(self.src))
    }

    fn string_literal(&mut self, i: usize) {
        let tok = self.sig[i];
        let Some(value) = tok.string_value(self.src) else { return };
        if self.frame().kind == FrameKind::InList {
            if let Some(col) = self.frame().in_column.clone() {
                self.out.literal_filters.push(LiteralFilter {
                    column: col,
                    literal: value,
                    span: tok.span.clone(),
                });
            }
            return;
        }
        let column = if i >= 2 && self.is_sym(i - 1, "=") {
            Some(self.sig[i - 2])
        } else if self.is_sym(i + 1, "=") {
            self.sig.get(i + 2).copied()
        } else {
            None
        };
        if let Some(c) = column {
            if matches!(c.kind, TokenKind::Ident | TokenKind::QuotedIdent) {
                let name = c.ident_name(self.src);
                if !is_keyword(&name) {
                    self.out.literal_filters.push(LiteralFilter {
                        column: name,
                        literal: value,
                        span: tok.span.clone(),
                    });
                }
            }
        }
    }

    /// Handle an identifier at `i`; returns the index of the last token consumed.
    fn identifier(&mut self, i: usize) -> usize {
        let tok = self.sig[i];
        let quoted = tok.kind == TokenKind::QuotedIdent;
        let lower = tok.ident_name(self.src);
        let kw = !quoted && is_keyword(&lower);

        if !quoted && WRITE_KEYWORDS.contains(&lower.as_str()) && !self.is_sym(i + 1, "(") {
            if self.out.write_keyword.is_none() {
                self.out.write_keyword = Some((lower.clone(), tok.span.clone()));
            }
            return i;
        }

        if kw {
            self.keyword(i, &lower);
            return i;
        }

        // function name; the call is recorded when the parenthesis opens
        if self.is_sym(i + 1, "(") && !quoted {
            let f = self.frame();
            if !(f.clause == Clause::From && f.expect_table) && f.clause != Clause::With {
                return i;
            }
        }

        if !quoted
            && LITERAL_PREFIXES.contains(&lower.as_str())
            && self.sig.get(i + 1).is_some_and(|t| t.kind == TokenKind::String)
        {
            return i;
        }

        // type name after `::`
        if i > 0 && self.is_sym(i - 1, "::") {
            return i;
        }

        let frame_kind = self.frame().kind;
        match frame_kind {
            FrameKind::Extract if !self.frame().seen_field => {
                self.frame().seen_field = true;
                return i;
            }
            FrameKind::Cast if i > 0 && self.is_kw(i - 1, "as") => return i,
            FrameKind::CteColumns => {
                self.out.aliases.insert(lower);
                return i;
            }
            FrameKind::Using => {
                self.out.columns.push(ColumnRef {
                    qualifier: None,
                    name: lower,
                    span: tok.span.clone(),
                });
                return i;
            }
            _ => {}
        }

        let clause = self.frame().clause;
        if clause == Clause::With {
            if self.frame().expect_cte_name || (i > 0 && self.is_kw(i - 1, "with")) || (i > 0 && self.is_kw(i - 1, "recursive")) {
                self.out.cte_names.insert(lower.clone());
                self.out.aliases.insert(lower.clone());
                self.cte_columns.entry(lower).or_default();
                self.frame().expect_cte_name = false;
            }
            return i;
        }

        if clause == Clause::From {
            if self.frame().expect_table {
                let last = self.add_table(i);
                let f = self.frame();
                f.expect_table = false;
                f.after_table = true;
                return last;
            }
            if self.frame().after_table || (i > 0 && self.is_kw(i - 1, "as")) {
                self.out.aliases.insert(lower.clone());
                if let Some(t) = self.out.tables.last_mut() {
                    if t.alias.is_none() && t.span.end <= tok.span.start {
                        t.alias = Some(lower);
                    }
                }
                self.frame().after_table = false;
                return i;
            }
        }

        // output alias: explicit AS, or implicit after an expression in the select list
        if i > 0 && self.is_kw(i - 1, "as") {
            self.out.aliases.insert(lower);
            return i;
        }
        if clause == Clause::Select && self.prev_is_alias_anchor(i) && !self.is_sym(i + 1, ".") {
            self.out.aliases.insert(lower);
            return i;
        }

        // qualified reference `q.col` or `q.*`
        if self.is_sym(i + 1, ".") {
            if let Some(next) = self.sig.get(i + 2) {
                if matches!(next.kind, TokenKind::Ident | TokenKind::QuotedIdent) {
                    self.out.columns.push(ColumnRef {
                        qualifier: Some(lower),
                        name: next.ident_name(self.src),
                        span: tok.span.start..next.span.end,
                    });
                    return i + 2;
                }
                if next.is_symbol(self.src, "*") {
                    if clause == Clause::Select {
                        if let Some(b) = self.frame().block {
                            self.out.blocks[b].star = true;
                        }
                    }
                    return i + 2;
                }
            }
        }

        self.out.columns.push(ColumnRef {
            qualifier: None,
            name: lower,
            span: tok.span.clone(),
        });
        i
    }

    fn keyword(&mut self, i: usize, kw: &str) {
        let in_call_like = matches!(
            self.frame().kind,
            FrameKind::Extract | FrameKind::Cast | FrameKind::Call(_)
        );
        match kw {
            "select" => self.start_block(self.sig[i].span.start),
            "with" => {
                self.out.has_cte = true;
                let f = self.frame();
                f.clause = Clause::With;
                f.expect_cte_name = true;
            }
            "from" if !in_call_like => {
                let f = self.frame();
                f.clause = Clause::From;
                f.expect_table = true;
                f.after_table = false;
            }
            "join" => {
                let f = self.frame();
                f.clause = Clause::From;
                f.expect_table = true;
                f.after_table = false;
            }
            "on" => {
                let f = self.frame();
                if f.clause == Clause::From {
                    f.clause = Clause::On;
                    f.after_table = false;
                }
            }
            "where" => self.frame().clause = Clause::Where,
            "group" => self.frame().clause = Clause::GroupBy,
            "having" => self.frame().clause = Clause::Having,
            "order" => {
                let f = self.frame();
                // ORDER BY inside OVER(...) stays in its own frame
                f.clause = Clause::OrderBy;
            }
            "limit" | "offset" | "fetch" => self.frame().clause = Clause::Limit,
            "union" | "intersect" | "except" => {
                if kw == "union" {
                    self.out.has_union = true;
                }
                let f = self.frame();
                f.pending_union = true;
                f.clause = Clause::None;
            }
            "left" | "right" | "inner" | "outer" | "full" | "cross" | "natural" | "lateral" => {
                self.frame().after_table = false;
            }
            _ => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cols(s: &StatementSummary) -> Vec<(String, String)> {
        s.referenced_columns.iter().cloned().collect()
    }

    #[test]
    fn minimal_select() {
        let s = parse_statement("SELECT 1");
        assert_eq!(s.statement_kind, StatementKind::Select);
        assert!(s.referenced_tables.is_empty());
        assert!(s.called_functions.is_empty());
    }

    #[test]
    fn drop_is_other() {
        assert_eq!(parse_statement("DROP TABLE checkins_nyc").statement_kind, StatementKind::Other);
    }

    #[test]
    fn write_hidden_after_select_is_other() {
        assert_eq!(
            parse_statement("SELECT 1; DELETE FROM checkins_nyc").statement_kind,
            StatementKind::Other
        );
        assert_eq!(
            parse_statement("WITH x AS (SELECT 1) DELETE FROM checkins_nyc").statement_kind,
            StatementKind::Other
        );
        assert_eq!(parse_statement("SELECT * INTO t2 FROM t").statement_kind, StatementKind::Other);
    }

    #[test]
    fn trailing_semicolon_ok() {
        assert_eq!(parse_statement("SELECT 1;").statement_kind, StatementKind::Select);
    }

    #[test]
    fn garbage_is_other() {
        assert_eq!(parse_statement("SELECT (1").statement_kind, StatementKind::Other);
        assert_eq!(parse_statement("SELECT 'x").statement_kind, StatementKind::Other);
        assert_eq!(parse_statement("").statement_kind, StatementKind::Other);
        assert_eq!(parse_statement("hello world").statement_kind, StatementKind::Other);
    }

    #[test]
    fn borough_case_query() {
        let sql = "SELECT CASE \
              WHEN latitude BETWEEN 40.5707 AND 40.7395 \
               AND longitude BETWEEN -74.0423 AND -73.8334 THEN 'Brooklyn' \
              WHEN latitude BETWEEN 40.5091 AND 40.8007 \
               AND longitude BETWEEN -73.9642 AND -73.7004 THEN 'Queens' \
            END AS borough, category_name FROM checkins_nyc";
        let s = parse_statement(sql);
        assert_eq!(s.statement_kind, StatementKind::Select);
        let c = cols(&s);
        assert!(c.contains(&(".".into(), "latitude".into())));
        assert!(c.contains(&(".".into(), "longitude".into())));
        assert!(!c.iter().any(|(_, n)| n == "borough"));
        assert!(s.called_functions.is_empty());
        assert_eq!(s.referenced_tables.iter().collect::<Vec<_>>(), ["checkins_nyc"]);
    }

    #[test]
    fn extract_and_functions() {
        let s = parse_statement(
            "SELECT EXTRACT(HOUR FROM checkin_time) AS hour, count(*) FROM checkins_nyc GROUP BY 1",
        );
        assert!(s.called_functions.contains("count"));
        assert!(!s.called_functions.contains("extract"));
        assert!(cols(&s).contains(&(".".into(), "checkin_time".into())));
        assert!(!cols(&s).iter().any(|(_, n)| n == "hour"));
        assert_eq!(s.referenced_tables.len(), 1);
    }

    #[test]
    fn cte_and_join_using() {
        let a = analyze(
            "WITH top AS (SELECT category_name FROM checkins_nyc GROUP BY 1 ORDER BY count(*) DESC LIMIT 5) \
             SELECT c.category_name, AVG(EXTRACT(HOUR FROM c.checkin_time)) AS avg_hour \
             FROM checkins_nyc c JOIN top USING (category_name) GROUP BY 1",
        );
        assert_eq!(a.kind, StatementKind::Select);
        assert!(a.has_cte);
        assert!(a.cte_names.contains("top"));
        let s = a.summary();
        assert_eq!(s.referenced_tables.iter().collect::<Vec<_>>(), ["checkins_nyc"]);
        assert!(s.referenced_columns.contains(&("c".into(), "checkin_time".into())));
        assert!(a.tables.iter().any(|t| t.alias.as_deref() == Some("c")));
    }

    #[test]
    fn union_branches_counted() {
        let a = analyze(
            "SELECT 'nyc' AS city, count(*) FROM checkins_nyc UNION ALL SELECT 'tokyo', count(*), 1 FROM checkins_tokyo",
        );
        assert!(a.has_union);
        assert_eq!(a.union_groups.len(), 1);
        let widths: Vec<usize> = a.union_groups[0].iter().map(|b| a.blocks[*b].items).collect();
        assert_eq!(widths, [2, 3]);
    }

    #[test]
    fn subquery_alias_in_from() {
        let a = analyze(
            "SELECT borough, count(*) FROM (SELECT CASE WHEN latitude > 1 THEN 'x' END AS borough FROM checkins_nyc) b GROUP BY borough",
        );
        assert_eq!(a.kind, StatementKind::Select);
        assert!(a.aliases.contains("b"));
        assert!(a.aliases.contains("borough"));
    }

    #[test]
    fn literal_filters_found() {
        let a = analyze(
            "SELECT * FROM checkins_nyc WHERE category_name = 'Laundromat' OR category_name IN ('Bar', 'Nightclub')",
        );
        let lits: Vec<&str> = a.literal_filters.iter().map(|l| l.literal.as_str()).collect();
        assert_eq!(lits, ["Laundromat", "Bar", "Nightclub"]);
        assert!(a.literal_filters.iter().all(|l| l.column == "category_name"));
    }

    #[test]
    fn function_spans_cover_call() {
        let sql = "SELECT * FROM checkins_nyc WHERE ST_DWithin(geom, ST_MakePoint(1, 2), 2000)";
        let a = analyze(sql);
        let f = a.functions.iter().find(|f| f.name == "st_dwithin").unwrap();
        assert_eq!(&sql[f.span.clone()], "ST_DWithin(geom, ST_MakePoint(1, 2), 2000)");
    }

    #[test]
    fn schema_qualified_table() {
        let s = parse_statement("SELECT c.latitude FROM public.checkins c");
        assert_eq!(s.referenced_tables.iter().collect::<Vec<_>>(), ["checkins"]);
    }

    #[test]
    fn date_literal_prefix_not_a_column() {
        let s = parse_statement(
            "SELECT * FROM checkins_nyc WHERE checkin_time >= TIMESTAMP '2012-11-22' AND checkin_time < DATE '2012-11-23'",
        );
        assert!(!cols(&s).iter().any(|(_, n)| n == "timestamp" || n == "date"));
    }
}
