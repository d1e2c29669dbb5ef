//! Per-dialogue long memory of earlier turns.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::db::outcome::truncate_chars;
use crate::db::ExecutionOutcome;
use crate::sql::{decompose_clauses, NormalizedSql, Schema, SqlClauses, SqlError};
use crate::templates::{current_q, fill, MEMORY_RETRIEVE_RESPONSE};

pub const MEMORY_SNIPPET_CHARS: usize = 50;

/// Where the SQL of earlier turns comes from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MemorySource {
    #[default]
    Gold,
    Predicted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnRecord {
    pub index: usize,
    pub question: String,
    pub gold_sql: NormalizedSql,
    pub parsed_elements: SqlClauses,
    pub result_snippet: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueMemory {
    pub dialogue_id: String,
    turns: Vec<TurnRecord>,
}

#[derive(Debug, thiserror::Error)]
pub enum MemoryError {
    #[error(transparent)]
    Sql(#[from] SqlError),
    #[error("memory file {path}: {reason}")]
    File { path: String, reason: String },
}

/// Bare rows (or the error text) cut to the memory snippet width.
pub fn memory_snippet(outcome: &ExecutionOutcome) -> String {
    let full = match &outcome.error_message {
        Some(msg) => msg.clone(),
        None => outcome.rows_repr(),
    };
    truncate_chars(&full, MEMORY_SNIPPET_CHARS)
}

impl DialogueMemory {
    pub fn new(dialogue_id: impl Into<String>) -> Self {
        Self {
            dialogue_id: dialogue_id.into(),
            turns: Vec::new(),
        }
    }

    pub fn turns(&self) -> &[TurnRecord] {
        &self.turns
    }

    pub fn len(&self) -> usize {
        self.turns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }

    /// Returns a new memory with one more record; `self` is untouched.
    pub fn append_turn(
        &self,
        question: &str,
        gold_sql: &NormalizedSql,
        gold_outcome: &ExecutionOutcome,
        schema: Option<&Schema>,
    ) -> Result<Self, SqlError> {
        let parsed_elements = decompose_clauses(gold_sql, schema)?;
        let mut next = self.clone();
        next.turns.push(TurnRecord {
            index: self.turns.len(),
            question: question.to_string(),
            gold_sql: gold_sql.clone(),
            parsed_elements,
            result_snippet: memory_snippet(gold_outcome),
        });
        Ok(next)
    }

    pub fn render(&self) -> String {
        render_memory(self)
    }

    pub fn file_path(dir: &Path, dialogue_id: &str) -> PathBuf {
        let safe: String = dialogue_id
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || "-_.".contains(c) {
                    c
                } else {
                    '_'
                }
            })
            .collect();
        dir.join(format!("{safe}.jsonl"))
    }

    /// Writes one record per line to `dir/<dialogue_id>.jsonl`.
    pub fn save(&self, dir: &Path) -> Result<PathBuf, MemoryError> {
        let path = Self::file_path(dir, &self.dialogue_id);
        let err = |e: std::io::Error| MemoryError::File {
            path: path.display().to_string(),
            reason: e.to_string(),
        };
        fs::create_dir_all(dir).map_err(err)?;
        let mut f = File::create(&path).map_err(err)?;
        for t in &self.turns {
            let line = serde_json::to_string(t).expect("turn records serialize");
            writeln!(f, "{line}").map_err(err)?;
        }
        Ok(path)
    }

    pub fn load(dir: &Path, dialogue_id: &str) -> Result<Self, MemoryError> {
        let path = Self::file_path(dir, dialogue_id);
        let fail = |reason: String| MemoryError::File {
            path: path.display().to_string(),
            reason,
        };
        let f = File::open(&path).map_err(|e| fail(e.to_string()))?;
        let mut turns = Vec::new();
        for line in BufReader::new(f).lines() {
            let line = line.map_err(|e| fail(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let t: TurnRecord = serde_json::from_str(&line).map_err(|e| fail(e.to_string()))?;
            if t.index != turns.len() {
                return Err(fail(format!("turn index {} out of sequence", t.index)));
            }
            turns.push(t);
        }
        Ok(Self {
            dialogue_id: dialogue_id.to_string(),
            turns,
        })
    }
}

fn render_block(t: &TurnRecord) -> String {
    format!(
        "== Turn {i} ==\nQuestion: {q}\nGround-Truth SQL: {sql}\nParsed Elements for each term: {parsed}\nSQL Results (truncated to 50 characters): {res}\n== Turn {i} ==",
        i = t.index,
        q = current_q(&t.question),
        sql = t.gold_sql.original(),
        parsed = t.parsed_elements.to_json(),
        res = t.result_snippet,
    )
}

pub fn render_memory(memory: &DialogueMemory) -> String {
    memory
        .turns
        .iter()
        .map(render_block)
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn render_memory_verify_prompt(
    memory: &DialogueMemory,
    current_question: &str,
    candidate_sql: &str,
    exec_snippet: &str,
) -> String {
    fill(
        MEMORY_RETRIEVE_RESPONSE,
        &[
            ("current_q", &current_q(current_question)),
            ("code", candidate_sql),
            ("execution_results", exec_snippet),
            ("memory_str", &render_memory(memory)),
        ],
    )
}
