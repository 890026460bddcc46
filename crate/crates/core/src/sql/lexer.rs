//! Span-preserving tokenizer for the supported SQL subset.

use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Range;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    /// Bare or double-quoted identifier; keywords are identifiers too, see [`Token::keyword`].
    Ident,
    QuotedIdent,
    String,
    Number,
    Symbol,
    Whitespace,
    Comment,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Range<usize>,
}

impl Token {
    pub fn text<'a>(&self, src: &'a str) -> &'a str {
        &src[self.span.clone()]
    }

    pub fn is_trivia(&self) -> bool {
        matches!(self.kind, TokenKind::Whitespace | TokenKind::Comment)
    }

    /// Case-insensitive keyword test for bare identifiers.
    pub fn is_keyword(&self, src: &str, kw: &str) -> bool {
        self.kind == TokenKind::Ident && self.text(src).eq_ignore_ascii_case(kw)
    }

    pub fn is_symbol(&self, src: &str, sym: &str) -> bool {
        self.kind == TokenKind::Symbol && self.text(src) == sym
    }

    /// Identifier name with quotes removed and case folded for bare names.
    pub fn ident_name(&self, src: &str) -> String {
        match self.kind {
            TokenKind::QuotedIdent => {
                let t = self.text(src);
                t[1..t.len().saturating_sub(1)].replace("\"\"", "\"")
            }
            _ => self.text(src).to_ascii_lowercase(),
        }
    }

    /// Contents of a single-quoted string literal with `''` unescaped.
    pub fn string_value(&self, src: &str) -> Option<String> {
        if self.kind != TokenKind::String {
            return None;
        }
        let t = self.text(src);
        Some(t[1..t.len().saturating_sub(1)].replace("''", "'"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexError {
    pub message: &'static str,
    pub span: Range<usize>,
}

const TWO_CHAR_SYMBOLS: [&str; 9] = ["<=", ">=", "<>", "!=", "||", "::", "@>", "<@", "->"];

/// Tokenize `src`. Trivia tokens are kept so that text can be rebuilt exactly.
pub fn tokenize(src: &str) -> Result<Vec<Token>, LexError> {
    let bytes = src.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let start = i;
        let b = bytes[i];
        let kind = if b.is_ascii_whitespace() {
            while i < bytes.len() && bytes[i].is_ascii_whitespace() {
                i += 1;
            }
            TokenKind::Whitespace
        } else if b == b'-' && bytes.get(i + 1) == Some(&b'-') {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            TokenKind::Comment
        } else if b == b'/' && bytes.get(i + 1) == Some(&b'*') {
            match src[i + 2..].find("*/") {
                Some(end) => i = i + 2 + end + 2,
                None => {
                    return Err(LexError {
                        message: "unterminated block comment",
                        span: start..bytes.len(),
                    })
                }
            }
            TokenKind::Comment
        } else if b == b'\'' {
            i += 1;
            loop {
                match bytes.get(i) {
                    None => {
                        return Err(LexError {
                            message: "unterminated string literal",
                            span: start..bytes.len(),
                        })
                    }
                    Some(b'\'') if bytes.get(i + 1) == Some(&b'\'') => i += 2,
                    Some(b'\'') => {
                        i += 1;
                        break;
                    }
                    Some(_) => i += 1,
                }
            }
            TokenKind::String
        } else if b == b'"' {
            i += 1;
            loop {
                match bytes.get(i) {
                    None => {
                        return Err(LexError {
                            message: "unterminated quoted identifier",
                            span: start..bytes.len(),
                        })
                    }
                    Some(b'"') if bytes.get(i + 1) == Some(&b'"') => i += 2,
                    Some(b'"') => {
                        i += 1;
                        break;
                    }
                    Some(_) => i += 1,
                }
            }
            TokenKind::QuotedIdent
        } else if b.is_ascii_digit() || (b == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            TokenKind::Number
        } else if b.is_ascii_alphabetic() || b == b'_' || b >= 0x80 {
            while i < bytes.len()
                && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'$' || bytes[i] >= 0x80)
            {
                i += 1;
            }
            TokenKind::Ident
        } else {
            let rest = &src[i..];
            let len = TWO_CHAR_SYMBOLS
                .iter()
                .find(|s| rest.starts_with(**s))
                .map_or_else(|| rest.chars().next().map_or(1, char::len_utf8), |s| s.len());
            i += len;
            TokenKind::Symbol
        };
        tokens.push(Token {
            kind,
            span: start..i,
        });
    }
    Ok(tokens)
}

/// Indices of the non-trivia tokens, in order.
pub fn significant(tokens: &[Token]) -> Vec<usize> {
    tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| !t.is_trivia())
        .map(|(i, _)| i)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<(TokenKind, &str)> {
        tokenize(src)
            .unwrap()
            .into_iter()
            .filter(|t| !t.is_trivia())
            .map(|t| (t.kind, &src[t.span]))
            .collect()
    }

    #[test]
    fn basic_select() {
        let toks = kinds("SELECT count(*) FROM checkins_nyc WHERE x >= 1.5e3");
        assert_eq!(toks[0], (TokenKind::Ident, "SELECT"));
        assert_eq!(toks[2], (TokenKind::Symbol, "("));
        assert!(toks.contains(&(TokenKind::Symbol, ">=")));
        assert!(toks.contains(&(TokenKind::Number, "1.5e3")));
    }

    #[test]
    fn strings_and_quotes() {
        let src = "WHERE name = 'New Year''s' AND \"Odd Col\" = 1 -- trailing\n";
        let toks = tokenize(src).unwrap();
        let s = toks.iter().find(|t| t.kind == TokenKind::String).unwrap();
        assert_eq!(s.string_value(src).unwrap(), "New Year's");
        let q = toks.iter().find(|t| t.kind == TokenKind::QuotedIdent).unwrap();
        assert_eq!(q.ident_name(src), "Odd Col");
        assert!(toks.iter().any(|t| t.kind == TokenKind::Comment));
    }

    #[test]
    fn unterminated_string_is_error() {
        let err = tokenize("SELECT 'abc").unwrap_err();
        assert_eq!(err.span, 7..11);
    }

    #[test]
    fn spans_rebuild_source() {
        let src = "SELECT a::date, b<>c /* x */ FROM t";
        let toks = tokenize(src).unwrap();
        let rebuilt: String = toks.iter().map(|t| t.text(src)).collect();
        assert_eq!(rebuilt, src);
    }
}
