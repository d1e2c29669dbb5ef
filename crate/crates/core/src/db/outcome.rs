use std::cmp::Ordering;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

/// A single cell value as returned by the engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Null,
    Integer(i64),
    Real(f64),
    Text(String),
    Blob(Blob),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Blob {
    pub blob: String,
}

impl From<rusqlite::types::ValueRef<'_>> for Value {
    fn from(v: rusqlite::types::ValueRef<'_>) -> Self {
        use rusqlite::types::ValueRef;
        match v {
            ValueRef::Null => Value::Null,
            ValueRef::Integer(i) => Value::Integer(i),
            ValueRef::Real(f) => Value::Real(f),
            ValueRef::Text(t) => Value::Text(String::from_utf8_lossy(t).into_owned()),
            ValueRef::Blob(b) => Value::Blob(Blob {
                blob: hex::encode(b),
            }),
        }
    }
}

impl Value {
    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    /// Python `repr` of the value, as seen in result snippets.
    pub fn repr(&self) -> String {
        match self {
            Value::Null => "None".into(),
            Value::Integer(i) => i.to_string(),
            Value::Real(f) => py_float(*f),
            Value::Text(s) => py_str(s),
            Value::Blob(b) => format!("b'{}'", b.blob),
        }
    }

    /// Python `str` of the value, as seen in schema example rows.
    pub fn display(&self) -> String {
        match self {
            Value::Text(s) => s.clone(),
            other => other.repr(),
        }
    }
}

fn py_float(f: f64) -> String {
    if f.is_nan() {
        return "nan".into();
    }
    if f.is_infinite() {
        return if f > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let a = f.abs();
    if a != 0.0 && !(1e-4..1e16).contains(&a) {
        let s = format!("{f:e}");
        let (mant, exp) = s.split_once('e').expect("exponent form");
        let exp: i32 = exp.parse().expect("integer exponent");
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mant}e{sign}{:02}", exp.abs());
    }
    format!("{f:?}")
}

fn py_str(s: &str) -> String {
    let quote = if s.contains('\'') && !s.contains('"') {
        '"'
    } else {
        '\''
    };
    let mut out = String::with_capacity(s.len() + 2);
    out.push(quote);
    for ch in s.chars() {
        match ch {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if c == quote => {
                out.push('\\');
                out.push(c);
            }
            c if (c as u32) < 0x20 || c as u32 == 0x7f => {
                let _ = write!(out, "\\x{:02x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push(quote);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecClass {
    Ok,
    Null,
    Error,
}

impl ExecClass {
    pub const ALL: [ExecClass; 3] = [ExecClass::Ok, ExecClass::Null, ExecClass::Error];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionOutcome {
    pub status: ExecClass,
    #[serde(default)]
    pub rows: Vec<Vec<Value>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_message: Option<String>,
    pub elapsed_ms: u64,
    #[serde(default)]
    pub truncated: bool,
}

impl ExecutionOutcome {
    pub fn from_rows(rows: Vec<Vec<Value>>, truncated: bool, elapsed_ms: u64) -> Self {
        let status = rows_class(&rows);
        Self {
            status,
            rows,
            error_message: None,
            elapsed_ms,
            truncated,
        }
    }

    pub fn error(message: impl Into<String>, elapsed_ms: u64) -> Self {
        Self {
            status: ExecClass::Error,
            rows: Vec::new(),
            error_message: Some(message.into()),
            elapsed_ms,
            truncated: false,
        }
    }

    /// Python list-of-tuples rendering of all rows.
    pub fn rows_repr(&self) -> String {
        let mut out = String::from("[");
        for (i, row) in self.rows.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            out.push('(');
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    out.push_str(", ");
                }
                out.push_str(&v.repr());
            }
            if row.len() == 1 {
                out.push(',');
            }
            out.push(')');
        }
        out.push(']');
        out
    }
}

fn rows_class(rows: &[Vec<Value>]) -> ExecClass {
    if rows.iter().any(|r| r.iter().any(|v| !v.is_null())) {
        ExecClass::Ok
    } else {
        ExecClass::Null
    }
}

pub fn classify_outcome(outcome: &ExecutionOutcome) -> ExecClass {
    if outcome.error_message.is_some() || outcome.status == ExecClass::Error {
        ExecClass::Error
    } else {
        rows_class(&outcome.rows)
    }
}

/// Comparison key: integer-valued reals compare equal to integers.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Key {
    Null,
    Int(i64),
    Real(OrdF64),
    Text(String),
    Blob(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

fn key(v: &Value) -> Key {
    match v {
        Value::Null => Key::Null,
        Value::Integer(i) => Key::Int(*i),
        Value::Real(f) if f.fract() == 0.0 && f.abs() < 9.0e15 => Key::Int(*f as i64),
        Value::Real(f) => Key::Real(OrdF64(*f)),
        Value::Text(s) => Key::Text(s.clone()),
        Value::Blob(b) => Key::Blob(b.blob.clone()),
    }
}

fn keyed(rows: &[Vec<Value>]) -> Vec<Vec<Key>> {
    rows.iter().map(|r| r.iter().map(key).collect()).collect()
}

pub fn execution_match(
    pred: &ExecutionOutcome,
    gold: &ExecutionOutcome,
    gold_ordered: bool,
) -> bool {
    if classify_outcome(pred) == ExecClass::Error || classify_outcome(gold) == ExecClass::Error {
        return false;
    }
    let mut p = keyed(&pred.rows);
    let mut g = keyed(&gold.rows);
    if !gold_ordered {
        p.sort();
        g.sort();
    }
    p == g
}

pub(crate) fn truncate_chars(s: &str, max_chars: usize) -> String {
    match s.char_indices().nth(max_chars) {
        Some((idx, _)) => s[..idx].to_string(),
        None => s.to_string(),
    }
}

pub const RESULT_PREFIX: &str = "The sql results example is: ";

pub fn render_result_snippet(outcome: &ExecutionOutcome, max_chars: usize) -> String {
    let full = match &outcome.error_message {
        Some(msg) => msg.clone(),
        None => format!("{RESULT_PREFIX}{}", outcome.rows_repr()),
    };
    truncate_chars(&full, max_chars)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ints(rows: &[&[i64]]) -> ExecutionOutcome {
        let rows = rows
            .iter()
            .map(|r| r.iter().map(|v| Value::Integer(*v)).collect())
            .collect();
        ExecutionOutcome::from_rows(rows, false, 0)
    }

    #[test]
    fn classes() {
        assert_eq!(classify_outcome(&ints(&[&[4]])), ExecClass::Ok);
        assert_eq!(classify_outcome(&ints(&[])), ExecClass::Null);
        let all_null = ExecutionOutcome::from_rows(vec![vec![Value::Null, Value::Null]], false, 0);
        assert_eq!(classify_outcome(&all_null), ExecClass::Null);
        assert_eq!(
            classify_outcome(&ExecutionOutcome::error("boom", 0)),
            ExecClass::Error
        );
    }

    #[test]
    fn snippet_matches_python_repr() {
        assert_eq!(
            render_result_snippet(&ints(&[&[0]]), 200),
            "The sql results example is: [(0,)]"
        );
        let rows = vec![
            vec![Value::Text("america".into()), Value::Integer(4)],
            vec![Value::Text("it's".into()), Value::Real(78.4)],
            vec![Value::Null, Value::Real(5.0)],
        ];
        let o = ExecutionOutcome::from_rows(rows, false, 0);
        assert_eq!(
            o.rows_repr(),
            "[('america', 4), (\"it's\", 78.4), (None, 5.0)]"
        );
        assert_eq!(render_result_snippet(&o, 10).chars().count(), 10);
    }

    #[test]
    fn float_repr_follows_python() {
        assert_eq!(py_float(1e16), "1e+16");
        assert_eq!(py_float(1.5e-5), "1.5e-05");
        assert_eq!(py_float(123456.0), "123456.0");
        assert_eq!(py_float(0.0001), "0.0001");
        assert_eq!(py_float(-0.0), "-0.0");
    }

    #[test]
    fn truncation_counts_codepoints() {
        let o = ExecutionOutcome::from_rows(vec![vec![Value::Text("ééééééééé".into())]], false, 0);
        let s = render_result_snippet(&o, 33);
        assert_eq!(s.chars().count(), 33);
        assert!(s.ends_with('é'));
    }

    #[test]
    fn error_snippet_is_verbatim() {
        let o = ExecutionOutcome::error("no such table: nope", 3);
        assert_eq!(render_result_snippet(&o, 200), "no such table: nope");
    }

    #[test]
    fn match_semantics() {
        let a = ints(&[&[1], &[2]]);
        let b = ints(&[&[2], &[1]]);
        assert!(execution_match(&a, &b, false));
        assert!(!execution_match(&a, &b, true));
        let e = ExecutionOutcome::error("x", 0);
        assert!(!execution_match(&e, &e, false));
        let real = ExecutionOutcome::from_rows(vec![vec![Value::Real(4.0)]], false, 0);
        assert!(execution_match(&real, &ints(&[&[4]]), true));
        let upper = ExecutionOutcome::from_rows(vec![vec![Value::Text("USA".into())]], false, 0);
        let lower = ExecutionOutcome::from_rows(vec![vec![Value::Text("usa".into())]], false, 0);
        assert!(!execution_match(&upper, &lower, false));
    }

    #[test]
    fn value_json_round_trip() {
        let rows = vec![vec![
            Value::Null,
            Value::Integer(3),
            Value::Real(2.5),
            Value::Text("x".into()),
        ]];
        let o = ExecutionOutcome::from_rows(rows, true, 7);
        let back: ExecutionOutcome =
            serde_json::from_str(&serde_json::to_string(&o).unwrap()).unwrap();
        assert_eq!(back, o);
    }
}
