use std::fmt;

use serde::{Deserialize, Serialize};

use super::token::{tokenize, Token, TokenKind, AGGREGATES};
use super::SqlError;

/// A query in canonical surface form.
///
/// Keywords are upper case, identifiers lower case, string literals untouched,
/// and tokens are re-spaced with a fixed rule set so that presentation noise
/// (line breaks, `count ( * )` vs `count(*)`, trailing `;`) disappears.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct NormalizedSql {
    text: String,
    original: String,
}

impl NormalizedSql {
    pub fn new(raw: &str) -> Result<Self, SqlError> {
        normalize_sql(raw)
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn original(&self) -> &str {
        &self.original
    }
}

impl TryFrom<String> for NormalizedSql {
    type Error = SqlError;

    fn try_from(raw: String) -> Result<Self, SqlError> {
        normalize_sql(&raw)
    }
}

impl From<NormalizedSql> for String {
    fn from(sql: NormalizedSql) -> String {
        sql.original
    }
}

impl fmt::Display for NormalizedSql {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

pub fn normalize_sql(raw: &str) -> Result<NormalizedSql, SqlError> {
    if raw.trim().is_empty() {
        return Err(SqlError::EmptyQuery);
    }
    let text = match tokenize(raw) {
        Ok(mut tokens) => {
            while tokens.last().is_some_and(|t| t.is_symbol(";")) {
                tokens.pop();
            }
            if tokens.is_empty() {
                return Err(SqlError::EmptyQuery);
            }
            render_tokens(&tokens)
        }
        // Unlexable input (e.g. an unterminated quote) still gets a stable form.
        Err(_) => {
            let collapsed = raw.split_whitespace().collect::<Vec<_>>().join(" ");
            collapsed.trim_end_matches([';', ' ']).to_string()
        }
    };
    if text.is_empty() {
        return Err(SqlError::EmptyQuery);
    }
    Ok(NormalizedSql {
        text,
        original: raw.to_string(),
    })
}

/// Joins tokens with the canonical spacing rules.
pub(crate) fn render_tokens(tokens: &[Token]) -> String {
    let mut out = String::new();
    for (i, tok) in tokens.iter().enumerate() {
        if i > 0 && needs_space(&tokens[i - 1], tok) {
            out.push(' ');
        }
        out.push_str(tok.text());
    }
    out
}

fn needs_space(prev: &Token, cur: &Token) -> bool {
    if prev.is_symbol(".") || cur.is_symbol(".") {
        return false;
    }
    if cur.is_symbol(",") || cur.is_symbol(")") || cur.is_symbol(";") {
        return false;
    }
    if prev.is_symbol("(") {
        return false;
    }
    if cur.is_symbol("(") {
        return !is_callable(prev);
    }
    true
}

fn is_callable(tok: &Token) -> bool {
    match &tok.kind {
        TokenKind::Ident(_) => true,
        TokenKind::Keyword(k) => AGGREGATES.contains(&k.as_str()) || k == "CAST" || k == "REPLACE",
        _ => false,
    }
}
