//! Rewrites the PostgreSQL constructs the generators emit into SQLite.
//!
//! `ILIKE` becomes `LIKE` (case-insensitive for ASCII in SQLite),
//! `EXTRACT(f FROM x)` becomes an integer `strftime`, typed literals such as
//! `TIMESTAMP '...'` lose their prefix and `x::type` becomes a cast.
//! `date_trunc` is provided as a registered function, see [`crate::store`].

use geoagent_core::sql::lexer::{tokenize, Token, TokenKind};

fn strftime_format(field: &str) -> Option<&'static str> {
    Some(match field {
        "hour" => "%H",
        "dow" => "%w",
        "day" => "%d",
        "month" => "%m",
        "year" => "%Y",
        "minute" => "%M",
        "second" => "%S",
        "doy" => "%j",
        "week" => "%W",
        "epoch" => "%s",
        _ => return None,
    })
}

/// Words after which `(` opens a group rather than a call's argument list.
const CLAUSE_WORDS: &[&str] = &[
    "select", "from", "where", "and", "or", "not", "in", "as", "on", "by", "having", "when", "then", "else",
    "case", "exists", "join", "union", "all", "distinct", "between", "like", "is", "with", "over", "limit",
];

fn cast_for(type_name: &str, operand: &str) -> String {
    match type_name {
        "date" => format!("date({operand})"),
        "int" | "integer" | "bigint" | "smallint" | "int4" | "int8" => format!("CAST({operand} AS INTEGER)"),
        "float" | "real" | "numeric" | "decimal" | "double" | "float8" | "float4" => {
            format!("CAST({operand} AS REAL)")
        }
        "text" | "varchar" | "char" => format!("CAST({operand} AS TEXT)"),
        _ => operand.to_string(),
    }
}

/// Translate `sql`; text that does not tokenize is returned unchanged.
pub fn translate(sql: &str) -> String {
    match tokenize(sql) {
        Ok(tokens) => emit(sql, &tokens, 0, tokens.len()),
        Err(_) => sql.to_string(),
    }
}

fn next_significant(tokens: &[Token], mut i: usize, end: usize) -> Option<usize> {
    while i < end {
        if !tokens[i].is_trivia() {
            return Some(i);
        }
        i += 1;
    }
    None
}

fn matching_paren(src: &str, tokens: &[Token], open: usize, end: usize) -> Option<usize> {
    let mut depth = 0usize;
    for (i, t) in tokens.iter().enumerate().take(end).skip(open) {
        if t.is_symbol(src, "(") {
            depth += 1;
        } else if t.is_symbol(src, ")") {
            depth -= 1;
            if depth == 0 {
                return Some(i);
            }
        }
    }
    None
}

/// `EXTRACT(field FROM expr)` spanning tokens `open..=close` (parentheses).
fn extract_call(src: &str, tokens: &[Token], open: usize, close: usize) -> Option<String> {
    let f = next_significant(tokens, open + 1, close)?;
    let fmt = strftime_format(&tokens[f].ident_name(src))?;
    let from = next_significant(tokens, f + 1, close)?;
    if !tokens[from].is_keyword(src, "from") {
        return None;
    }
    let expr = emit(src, tokens, from + 1, close);
    Some(format!("CAST(strftime('{fmt}', {}) AS INTEGER)", expr.trim()))
}

fn emit(src: &str, tokens: &[Token], start: usize, end: usize) -> String {
    let mut out = String::new();
    // start of the most recent operand in `out`, for postfix casts
    let mut unit_start = 0usize;
    let mut prev_ident = false;
    let mut i = start;
    while i < end {
        let t = &tokens[i];
        if t.is_trivia() {
            out.push_str(t.text(src));
            i += 1;
            continue;
        }
        if t.is_keyword(src, "extract") {
            if let Some(open) = next_significant(tokens, i + 1, end).filter(|&o| tokens[o].is_symbol(src, "(")) {
                if let Some(close) = matching_paren(src, tokens, open, end) {
                    if let Some(call) = extract_call(src, tokens, open, close) {
                        unit_start = out.len();
                        out.push_str(&call);
                        prev_ident = false;
                        i = close + 1;
                        continue;
                    }
                }
            }
        }
        if t.is_keyword(src, "ilike") {
            unit_start = out.len();
            out.push_str("LIKE");
            prev_ident = false;
            i += 1;
            continue;
        }
        if t.is_keyword(src, "timestamp") || t.is_keyword(src, "date") || t.is_keyword(src, "time") {
            if let Some(n) = next_significant(tokens, i + 1, end) {
                if tokens[n].kind == TokenKind::String {
                    unit_start = out.len();
                    out.push_str(tokens[n].text(src));
                    prev_ident = false;
                    i = n + 1;
                    continue;
                }
            }
        }
        if t.is_symbol(src, "(") {
            if let Some(close) = matching_paren(src, tokens, i, end) {
                if !prev_ident {
                    unit_start = out.len();
                }
                out.push('(');
                out.push_str(&emit(src, tokens, i + 1, close));
                out.push(')');
                prev_ident = false;
                i = close + 1;
                continue;
            }
        }
        if t.is_symbol(src, "::") {
            if let Some(n) = next_significant(tokens, i + 1, end) {
                let mut type_name = tokens[n].ident_name(src);
                let mut after = n + 1;
                if type_name == "double" {
                    if let Some(p) = next_significant(tokens, after, end).filter(|&p| tokens[p].is_keyword(src, "precision")) {
                        after = p + 1;
                    }
                    type_name = "double".into();
                }
                // drop a length such as varchar(20)
                if let Some(p) = next_significant(tokens, after, end).filter(|&p| tokens[p].is_symbol(src, "(")) {
                    if let Some(close) = matching_paren(src, tokens, p, end) {
                        after = close + 1;
                    }
                }
                let operand = out[unit_start..].trim_end().to_string();
                out.truncate(unit_start);
                out.push_str(&cast_for(&type_name, &operand));
                prev_ident = false;
                i = after;
                continue;
            }
        }
        let is_ident = t.kind == TokenKind::QuotedIdent
            || (t.kind == TokenKind::Ident && !CLAUSE_WORDS.contains(&t.ident_name(src).as_str()));
        let joins_qualified = t.is_symbol(src, ".") || (is_ident && out.ends_with('.'));
        if !joins_qualified {
            unit_start = out.len();
        }
        out.push_str(t.text(src));
        prev_ident = is_ident;
        i += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ilike_and_extract() {
        assert_eq!(
            translate("SELECT EXTRACT(HOUR FROM checkin_time) AS h FROM t WHERE category_name ILIKE '%bar%'"),
            "SELECT CAST(strftime('%H', checkin_time) AS INTEGER) AS h FROM t WHERE category_name LIKE '%bar%'"
        );
    }

    #[test]
    fn nested_extract() {
        assert_eq!(
            translate("SELECT extract(dow from date_trunc('day', EXTRACT(HOUR FROM x)))"),
            "SELECT CAST(strftime('%w', date_trunc('day', CAST(strftime('%H', x) AS INTEGER))) AS INTEGER)"
        );
    }

    #[test]
    fn typed_literals() {
        assert_eq!(
            translate("WHERE checkin_time >= TIMESTAMP '2012-11-22' AND d < DATE '2012-11-23'"),
            "WHERE checkin_time >= '2012-11-22' AND d < '2012-11-23'"
        );
        assert_eq!(translate("SELECT date(checkin_time)"), "SELECT date(checkin_time)");
    }

    #[test]
    fn postfix_casts() {
        assert_eq!(translate("SELECT checkin_time::date FROM t"), "SELECT date(checkin_time) FROM t");
        assert_eq!(translate("SELECT COUNT(*)::float / 2"), "SELECT CAST(COUNT(*) AS REAL) / 2");
        assert_eq!(translate("SELECT t.n::int"), "SELECT CAST(t.n AS INTEGER)");
        assert_eq!(translate("SELECT (a + b)::numeric"), "SELECT CAST((a + b) AS REAL)");
    }

    #[test]
    fn untouched_when_plain() {
        let sql = "SELECT category_name, COUNT(*) FROM checkins_nyc GROUP BY 1 ORDER BY 2 DESC LIMIT 5";
        assert_eq!(translate(sql), sql);
    }

    #[test]
    fn strings_are_not_rewritten() {
        let sql = "SELECT 'ILIKE EXTRACT(HOUR FROM x)'";
        assert_eq!(translate(sql), sql);
    }
}
