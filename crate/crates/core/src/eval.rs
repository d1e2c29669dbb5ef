//! Offline EM/EX evaluation of predictions against a task file.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::db::{DatabaseRegistry, ExecLimits};
use crate::reward::{reward_em, reward_ex, GoldReference};
use crate::sql::{classify_hardness, normalize_sql, Hardness};
use crate::task::DialogueTask;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub task_id: String,
    #[serde(default)]
    pub sql: String,
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("prediction for unknown task {0}")]
    UnknownTask(String),
    #[error("no prediction for task {0}")]
    MissingPrediction(String),
    #[error("duplicate prediction for task {0}")]
    DuplicatePrediction(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleResult {
    pub task_id: String,
    /// 1-based position of the turn in its dialogue.
    pub turn: usize,
    pub hardness: Hardness,
    pub em: bool,
    pub ex: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub n: usize,
    pub em: f64,
    pub ex: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub overall: Bucket,
    pub by_turn: BTreeMap<String, Bucket>,
    pub by_hardness: BTreeMap<String, Bucket>,
    pub examples: Vec<ExampleResult>,
}

pub fn turn_bucket(turn: usize) -> &'static str {
    match turn {
        0 | 1 => "1",
        2 => "2",
        3 => "3",
        _ => ">=4",
    }
}

fn bucket<'a>(rows: impl Iterator<Item = &'a ExampleResult>) -> Bucket {
    let (mut n, mut em, mut ex) = (0, 0, 0);
    for r in rows {
        n += 1;
        em += usize::from(r.em);
        ex += usize::from(r.ex);
    }
    let pct = |k: usize| {
        if n == 0 {
            0.0
        } else {
            100.0 * k as f64 / n as f64
        }
    };
    Bucket {
        n,
        em: pct(em),
        ex: pct(ex),
    }
}

pub fn summarize(examples: Vec<ExampleResult>) -> EvalReport {
    let overall = bucket(examples.iter());
    let by_turn = ["1", "2", "3", ">=4"]
        .iter()
        .map(|b| {
            (
                b.to_string(),
                bucket(examples.iter().filter(|r| turn_bucket(r.turn) == *b)),
            )
        })
        .collect();
    let by_hardness = Hardness::ALL
        .iter()
        .map(|h| {
            (
                h.as_str().to_string(),
                bucket(examples.iter().filter(|r| r.hardness == *h)),
            )
        })
        .collect();
    EvalReport {
        overall,
        by_turn,
        by_hardness,
        examples,
    }
}

fn evaluate_one(
    task: &DialogueTask,
    pred: &str,
    registry: &DatabaseRegistry,
    limits: ExecLimits,
) -> ExampleResult {
    let turn = task.turn_index + 1;
    let fail = |note: String| ExampleResult {
        task_id: task.id(),
        turn,
        hardness: Hardness::Extra,
        em: false,
        ex: false,
        note: Some(note),
    };
    let gold = match GoldReference::compute(task, registry, limits) {
        Ok(g) => g,
        Err(e) => return fail(e.to_string()),
    };
    let hardness = gold
        .clauses
        .as_ref()
        .map_or(Hardness::Extra, classify_hardness);
    let Ok(sql) = normalize_sql(pred) else {
        return ExampleResult {
            hardness,
            note: Some("empty prediction".into()),
            ..fail(String::new())
        };
    };
    let outcome = match registry.open(&task.db_id) {
        Ok(db) => db.execute(sql.original(), limits),
        Err(e) => {
            return ExampleResult {
                hardness,
                ..fail(e.to_string())
            }
        }
    };
    ExampleResult {
        task_id: task.id(),
        turn,
        hardness,
        em: reward_em(&sql, &gold.sql) == 1.0,
        ex: reward_ex(&outcome, &gold.outcome, gold.ordered) == 1.0,
        note: outcome.error_message,
    }
}

/// Scores one prediction per task. Every task needs exactly one prediction.
pub fn evaluate(
    tasks: &[DialogueTask],
    predictions: &[Prediction],
    registry: &DatabaseRegistry,
    limits: ExecLimits,
) -> Result<EvalReport, EvalError> {
    let ids: HashMap<String, &DialogueTask> = tasks.iter().map(|t| (t.id(), t)).collect();
    let mut preds: HashMap<&str, &str> = HashMap::new();
    for p in predictions {
        if !ids.contains_key(&p.task_id) {
            return Err(EvalError::UnknownTask(p.task_id.clone()));
        }
        if preds.insert(&p.task_id, &p.sql).is_some() {
            return Err(EvalError::DuplicatePrediction(p.task_id.clone()));
        }
    }
    if let Some(t) = tasks.iter().find(|t| !preds.contains_key(t.id().as_str())) {
        return Err(EvalError::MissingPrediction(t.id()));
    }
    let examples = tasks
        .par_iter()
        .map(|t| evaluate_one(t, preds[t.id().as_str()], registry, limits))
        .collect();
    Ok(summarize(examples))
}

pub fn render_table(report: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<12} {:>6} {:>8} {:>8}", "slice", "n", "EM%", "EX%");
    let mut row = |name: &str, b: &Bucket| {
        let _ = writeln!(out, "{name:<12} {:>6} {:>8.1} {:>8.1}", b.n, b.em, b.ex);
    };
    row("overall", &report.overall);
    for (k, b) in &report.by_turn {
        row(&format!("turn {k}"), b);
    }
    for h in Hardness::ALL {
        if let Some(b) = report.by_hardness.get(h.as_str()) {
            row(h.as_str(), b);
        }
    }
    out
}
