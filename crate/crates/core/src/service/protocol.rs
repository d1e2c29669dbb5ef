//! Wire types for the newline-delimited JSON environment protocol.

use serde::{Deserialize, Serialize};

use crate::episode::{Action, Termination, Trajectory, Violation};
use crate::reward::RewardBreakdown;

pub const PROTOCOL_VERSION: u32 = 1;

/// Request body after the `v` and `id` envelope fields are removed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Request {
    Reset {
        task_id: String,
        #[serde(default)]
        sample: u32,
    },
    /// One raw model emission.
    Step {
        session: String,
        model_text: String,
    },
    /// One typed action; grammar violations are rejected instead of recorded.
    Action {
        session: String,
        action: Action,
    },
    Close {
        session: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    ParseError,
    BadRequest,
    UnsupportedVersion,
    UnknownTask,
    UnknownSession,
    IllegalTransition,
    BudgetExceeded,
    Runtime,
}

impl ErrorCode {
    pub const ALL: [ErrorCode; 8] = [
        ErrorCode::ParseError,
        ErrorCode::BadRequest,
        ErrorCode::UnsupportedVersion,
        ErrorCode::UnknownTask,
        ErrorCode::UnknownSession,
        ErrorCode::IllegalTransition,
        ErrorCode::BudgetExceeded,
        ErrorCode::Runtime,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{code:?}: {message}")]
pub struct ServiceError {
    pub code: ErrorCode,
    pub message: String,
}

impl ServiceError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Reply {
    Reset(ResetReply),
    Step(Box<StepResult>),
    Close(CloseReply),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResetReply {
    pub session: String,
    pub task_id: String,
    /// The full prompt text.
    pub observation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepResult {
    pub session: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation: Option<String>,
    pub terminal: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub termination: Option<Termination>,
    #[serde(default)]
    pub violations: Vec<Violation>,
    /// Present only on terminal replies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reward_breakdown: Option<RewardBreakdown>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<Trajectory>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CloseReply {
    pub session: String,
    pub closed: bool,
}

/// JSON Schema describing every request and reply.
pub const PROTOCOL_SCHEMA: &str = include_str!("../../protocol/schema.json");
