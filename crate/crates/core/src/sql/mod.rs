//! SQL guard: tolerant parsing, lint rules and the bounding-box rewrite.

pub mod lexer;
pub mod lint;
pub mod parse;
pub mod rewrite;

pub use lint::{lint, lint_with, LintConfig, RuleId, Severity, SqlDiagnostic};
pub use parse::{analyze, parse_statement, StatementKind, StatementSummary};
pub use rewrite::{radial_box, rewrite_radial_to_bbox, BoxBounds, LatLon, RewriteError};

/// True when no diagnostic in `diags` has error severity.
pub fn is_executable(diags: &[SqlDiagnostic]) -> bool {
    !diags.iter().any(SqlDiagnostic::is_error)
}

/// Strip Markdown code fences and surrounding prose from a generated completion,
/// returning the SQL statement text.
pub fn extract_sql(completion: &str) -> alloc::string::String {
    let text = completion.trim();
    if let Some(start) = text.find("```") {
        let after = &text[start + 3..];
        let after = after
            .strip_prefix("sql")
            .or_else(|| after.strip_prefix("SQL"))
            .unwrap_or(after);
        let body = match after.find("```") {
            Some(end) => &after[..end],
            None => after,
        };
        return body.trim().into();
    }
    text.into()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extract_from_fence() {
        assert_eq!(extract_sql("Here:\n```sql\nSELECT 1;\n```\nDone"), "SELECT 1;");
        assert_eq!(extract_sql("  SELECT 2  "), "SELECT 2");
    }
}
