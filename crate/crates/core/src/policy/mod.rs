//! Model backends behind one request/response contract.

use serde::{Deserialize, Serialize};

pub mod remote;
pub mod scripted;

pub use remote::{RemoteConfig, RemotePolicy};
pub use scripted::{conversation_key, FixtureEntry, ScriptedMode, ScriptedPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
    Tool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        Self {
            role,
            content: content.into(),
        }
    }
}

pub const TOOL_CALL_STOP: &str = "</tool_call>";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub messages: Vec<Message>,
    pub temperature: f64,
    /// Upper bound on new text, in usage units of four characters.
    pub max_new_units: usize,
    pub seed: u64,
    #[serde(default)]
    pub stop: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FinishReason {
    #[serde(rename = "stop_marker")]
    Stop,
    #[serde(rename = "budget")]
    Length,
    #[serde(rename = "endpoint_end")]
    End,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_units: usize,
    pub completion_units: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResponse {
    pub text: String,
    pub finish: FinishReason,
    #[serde(default)]
    pub usage: Usage,
}

#[derive(Debug, thiserror::Error)]
pub enum PolicyError {
    #[error("policy unavailable: {0}")]
    Unavailable(String),
    #[error("no scripted continuation for conversation {key} at step {index}")]
    FixtureMissing { key: String, index: usize },
    #[error("duplicate fixture key {0}")]
    DuplicateKey(String),
    #[error("fixture file {path}: {reason}")]
    Fixture { path: String, reason: String },
}

/// Four characters per unit, rounded up.
pub fn usage_units(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

pub fn truncate_units(text: &str, units: usize) -> &str {
    match text.char_indices().nth(units.saturating_mul(4)) {
        Some((i, _)) => &text[..i],
        None => text,
    }
}

/// Cuts text just after the first stop marker.
pub fn apply_stop<'a>(text: &'a str, stop: &[String]) -> (&'a str, bool) {
    let cut = stop
        .iter()
        .filter_map(|s| text.find(s.as_str()).map(|i| i + s.len()))
        .min();
    match cut {
        Some(i) => (&text[..i], true),
        None => (text, false),
    }
}

pub trait Policy: Send + Sync {
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResponse, PolicyError>;
}

impl<P: Policy + ?Sized> Policy for std::sync::Arc<P> {
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResponse, PolicyError> {
        (**self).generate(request)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn units_and_stops() {
        assert_eq!(usage_units(""), 0);
        assert_eq!(usage_units("abcde"), 2);
        assert_eq!(truncate_units("abcdefghij", 2), "abcdefgh");
        let stop = vec![TOOL_CALL_STOP.to_string()];
        assert_eq!(apply_stop("a</tool_call>b", &stop), ("a</tool_call>", true));
        assert_eq!(apply_stop("ab", &stop), ("ab", false));
    }
}
