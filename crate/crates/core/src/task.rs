//! Dialogue turns as units of work.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryTurn {
    pub question: String,
    pub gold_sql: String,
    /// Model prediction for this turn, used when memory is built from predictions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_sql: Option<String>,
}

/// One turn of a conversation, with everything needed to score it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueTask {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task_id: Option<String>,
    pub dialogue_id: String,
    pub turn_index: usize,
    pub question: String,
    #[serde(default)]
    pub history: Vec<HistoryTurn>,
    pub db_id: String,
    pub gold_sql: String,
}

impl DialogueTask {
    /// Explicit `task_id`, else `dialogue_id#turn_index`.
    pub fn id(&self) -> String {
        self.task_id
            .clone()
            .unwrap_or_else(|| format!("{}#{}", self.dialogue_id, self.turn_index))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum JsonlError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Json {
        path: String,
        line: usize,
        source: serde_json::Error,
    },
}

/// Reads any JSONL file of serde records, skipping blank lines.
pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, JsonlError> {
    let p = path.display().to_string();
    let file = File::open(path).map_err(|source| JsonlError::Io {
        path: p.clone(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| JsonlError::Io {
            path: p.clone(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|source| JsonlError::Json {
                path: p.clone(),
                line: i + 1,
                source,
            })?,
        );
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), JsonlError> {
    let p = path.display().to_string();
    let io = |source| JsonlError::Io {
        path: p.clone(),
        source,
    };
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(io)?;
    }
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|source| JsonlError::Json {
            path: p.clone(),
            line: 0,
            source,
        })?;
        w.write_all(b"\n").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn load_tasks(path: &Path) -> Result<Vec<DialogueTask>, JsonlError> {
    read_jsonl(path)
}
