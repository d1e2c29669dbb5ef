//! Lexer for the SQL subset used by conversational text-to-SQL benchmarks.

use std::fmt;

/// Words folded to upper case and treated as syntax rather than identifiers.
const KEYWORDS: &[&str] = &[
    "ALL",
    "ALTER",
    "AND",
    "AS",
    "ASC",
    "AVG",
    "BETWEEN",
    "BY",
    "CASE",
    "CAST",
    "COUNT",
    "CREATE",
    "CROSS",
    "DELETE",
    "DESC",
    "DISTINCT",
    "DROP",
    "ELSE",
    "END",
    "EXCEPT",
    "EXISTS",
    "FROM",
    "FULL",
    "GLOB",
    "GROUP",
    "HAVING",
    "IN",
    "INNER",
    "INSERT",
    "INTERSECT",
    "INTO",
    "IS",
    "JOIN",
    "LEFT",
    "LIKE",
    "LIMIT",
    "MAX",
    "MIN",
    "NATURAL",
    "NOT",
    "NULL",
    "OFFSET",
    "ON",
    "OR",
    "ORDER",
    "OUTER",
    "RECURSIVE",
    "REPLACE",
    "RIGHT",
    "SELECT",
    "SET",
    "SUM",
    "TABLE",
    "THEN",
    "UNION",
    "UPDATE",
    "USING",
    "VALUES",
    "WHEN",
    "WHERE",
    "WITH",
];

/// Keywords that behave like function names (no space before their argument list).
pub(crate) const AGGREGATES: &[&str] = &["AVG", "COUNT", "MAX", "MIN", "SUM"];

pub(crate) fn is_keyword(word: &str) -> bool {
    let upper = word.to_ascii_uppercase();
    KEYWORDS.binary_search(&upper.as_str()).is_ok()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    /// Upper-cased keyword.
    Keyword(String),
    /// Lower-cased identifier with any quoting removed.
    Ident(String),
    /// Numeric literal as written.
    Number(String),
    /// String literal; `raw` keeps the source bytes including quotes.
    Str { value: String, raw: String },
    /// Operators and punctuation.
    Symbol(String),
    /// Anything the lexer does not understand, kept verbatim.
    Other(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    /// Byte offset of the token in the source text.
    pub offset: usize,
}

impl Token {
    pub fn is_keyword(&self, kw: &str) -> bool {
        matches!(&self.kind, TokenKind::Keyword(k) if k == kw)
    }

    pub fn is_symbol(&self, sym: &str) -> bool {
        matches!(&self.kind, TokenKind::Symbol(s) if s == sym)
    }

    /// Canonical text of the token as it appears in normalized SQL.
    pub fn text(&self) -> &str {
        match &self.kind {
            TokenKind::Keyword(s)
            | TokenKind::Ident(s)
            | TokenKind::Number(s)
            | TokenKind::Symbol(s)
            | TokenKind::Other(s) => s,
            TokenKind::Str { raw, .. } => raw,
        }
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.text())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unterminated {what} starting at byte {offset}")]
pub struct LexError {
    pub offset: usize,
    pub what: &'static str,
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, LexError> {
    let bytes = src.as_bytes();
    let mut out: Vec<Token> = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c == b'-' && bytes.get(i + 1) == Some(&b'-') {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if c == b'/' && bytes.get(i + 1) == Some(&b'*') {
            let start = i;
            i += 2;
            loop {
                if i + 1 >= bytes.len() {
                    return Err(LexError {
                        offset: start,
                        what: "comment",
                    });
                }
                if bytes[i] == b'*' && bytes[i + 1] == b'/' {
                    i += 2;
                    break;
                }
                i += 1;
            }
            continue;
        }
        let start = i;
        let kind = match c {
            b'\'' | b'"' => {
                let (value, end) = lex_quoted(src, i, c).ok_or(LexError {
                    offset: start,
                    what: "string literal",
                })?;
                i = end;
                TokenKind::Str {
                    value,
                    raw: src[start..end].to_string(),
                }
            }
            b'`' | b'[' => {
                let close = if c == b'`' { b'`' } else { b']' };
                let rel = bytes[i + 1..]
                    .iter()
                    .position(|&b| b == close)
                    .ok_or(LexError {
                        offset: start,
                        what: "quoted identifier",
                    })?;
                let name = &src[i + 1..i + 1 + rel];
                i += rel + 2;
                TokenKind::Ident(name.to_lowercase())
            }
            b'0'..=b'9' => {
                i = lex_number(bytes, i);
                TokenKind::Number(src[start..i].to_ascii_lowercase())
            }
            b'.' if bytes.get(i + 1).is_some_and(u8::is_ascii_digit) && !prev_is_operand(&out) => {
                i = lex_number(bytes, i);
                TokenKind::Number(src[start..i].to_string())
            }
            b'-' if bytes
                .get(i + 1)
                .is_some_and(|b| b.is_ascii_digit() || *b == b'.')
                && !prev_is_operand(&out) =>
            {
                i = lex_number(bytes, i + 1);
                TokenKind::Number(src[start..i].to_ascii_lowercase())
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'$')
                {
                    i += 1;
                }
                let word = &src[start..i];
                if is_keyword(word) {
                    TokenKind::Keyword(word.to_ascii_uppercase())
                } else {
                    TokenKind::Ident(word.to_lowercase())
                }
            }
            _ => {
                let two = src.get(i..i + 2).unwrap_or("");
                let sym = match two {
                    "<=" | ">=" | "<>" | "!=" | "==" | "||" => two,
                    _ => &src[i..i + 1],
                };
                if matches!(
                    sym,
                    "=" | "<"
                        | ">"
                        | "<="
                        | ">="
                        | "<>"
                        | "!="
                        | "=="
                        | "||"
                        | "+"
                        | "-"
                        | "*"
                        | "/"
                        | "%"
                        | ","
                        | "("
                        | ")"
                        | "."
                        | ";"
                ) {
                    i += sym.len();
                    TokenKind::Symbol(sym.to_string())
                } else {
                    let ch = src[i..].chars().next().expect("non-empty remainder");
                    i += ch.len_utf8();
                    TokenKind::Other(ch.to_string())
                }
            }
        };
        out.push(Token {
            kind,
            offset: start,
        });
    }
    Ok(out)
}

/// True when the previous token ends an operand, so a following `-` is binary.
fn prev_is_operand(out: &[Token]) -> bool {
    match out.last().map(|t| &t.kind) {
        None => false,
        Some(TokenKind::Ident(_) | TokenKind::Number(_) | TokenKind::Str { .. }) => true,
        Some(TokenKind::Symbol(s)) => s == ")",
        Some(TokenKind::Keyword(k)) => k == "NULL" || k == "END",
        Some(TokenKind::Other(_)) => false,
    }
}

fn lex_number(bytes: &[u8], mut i: usize) -> usize {
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        i += 1;
    }
    if i < bytes.len() && bytes[i] == b'.' {
        i += 1;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
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
    i
}

/// Returns the unescaped literal value and the byte index after the closing quote.
fn lex_quoted(src: &str, start: usize, quote: u8) -> Option<(String, usize)> {
    let bytes = src.as_bytes();
    let mut value = String::new();
    let mut i = start + 1;
    let mut seg = i;
    while i < bytes.len() {
        if bytes[i] == quote {
            if bytes.get(i + 1) == Some(&quote) {
                value.push_str(&src[seg..=i]);
                i += 2;
                seg = i;
                continue;
            }
            value.push_str(&src[seg..i]);
            return Some((value, i + 1));
        }
        i += 1;
    }
    None
}
