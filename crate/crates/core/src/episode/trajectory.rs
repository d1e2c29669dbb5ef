use std::ops::Range;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::action::Action;
use crate::db::ExecutionOutcome;
use crate::sql::NormalizedSql;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Prompt,
    Model,
    Environment,
}

/// A contiguous piece of the exchange. Concatenating all segments gives the
/// full text seen by the model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub origin: Origin,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Finalized,
    MaxInteractions,
    MaxLength,
    ParseFailure,
    Aborted,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Finalized => "finalized",
            Termination::MaxInteractions => "max_interactions",
            Termination::MaxLength => "max_length",
            Termination::ParseFailure => "parse_failure",
            Termination::Aborted => "aborted",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    IllegalTransition,
    Budget,
    TagGrammar,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Action index, or model segment index for tag grammar problems.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trajectory {
    pub id: String,
    pub task_id: String,
    #[serde(default)]
    pub sample: u32,
    pub segments: Vec<Segment>,
    pub actions: Vec<Action>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_sql: Option<NormalizedSql>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_outcome: Option<ExecutionOutcome>,
    pub termination: Termination,
    #[serde(default)]
    pub violations: Vec<Violation>,
    pub interactions: usize,
    pub response_units: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abort_reason: Option<String>,
}

impl Trajectory {
    /// A bare trajectory holding only actions, for grammar checks.
    pub fn from_actions(actions: Vec<Action>) -> Self {
        let interactions = actions.iter().filter(|a| a.kind.is_tool_call()).count();
        Self {
            id: String::new(),
            task_id: String::new(),
            sample: 0,
            segments: Vec::new(),
            actions,
            final_sql: None,
            final_outcome: None,
            termination: Termination::Finalized,
            violations: Vec::new(),
            interactions,
            response_units: 0,
            abort_reason: None,
        }
    }

    pub fn text(&self) -> String {
        self.segments.iter().map(|s| s.text.as_str()).collect()
    }

    /// Character spans of each segment within [`Trajectory::text`].
    pub fn spans(&self) -> Vec<(Origin, Range<usize>)> {
        let mut at = 0;
        self.segments
            .iter()
            .map(|s| {
                let n = s.text.chars().count();
                let r = at..at + n;
                at += n;
                (s.origin, r)
            })
            .collect()
    }

    pub fn model_segments(&self) -> impl Iterator<Item = &str> {
        self.segments
            .iter()
            .filter(|s| s.origin == Origin::Model)
            .map(|s| s.text.as_str())
    }

    pub fn is_finalized(&self) -> bool {
        self.termination == Termination::Finalized
    }
}

/// Stable id from task, sample index and the full exchange.
pub fn trajectory_id(task_id: &str, sample: u32, segments: &[Segment]) -> String {
    let mut h = Sha256::new();
    h.update(task_id.as_bytes());
    h.update([0]);
    h.update(sample.to_le_bytes());
    for s in segments {
        h.update([0]);
        h.update(s.text.as_bytes());
    }
    hex::encode(&h.finalize()[..8])
}
