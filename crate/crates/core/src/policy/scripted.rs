use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    apply_stop, truncate_units, usage_units, FinishReason, GenerationRequest, GenerationResponse,
    Message, Policy, PolicyError, Role, Usage,
};
use crate::task::read_jsonl;

/// One recorded conversation: the continuation for each assistant turn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureEntry {
    pub key: String,
    pub continuations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScriptedMode {
    /// Unknown conversations are an error.
    Strict,
    /// Unknown conversations get this text.
    Fallback(String),
}

/// Hash of the messages before the first assistant turn, with whitespace
/// collapsed so incidental spacing does not change the key.
pub fn conversation_key(messages: &[Message]) -> String {
    let mut h = Sha256::new();
    for m in messages.iter().take_while(|m| m.role != Role::Assistant) {
        let role = serde_json::to_string(&m.role).expect("role serializes");
        h.update(role.as_bytes());
        h.update([0x1f]);
        h.update(
            m.content
                .split_whitespace()
                .collect::<Vec<_>>()
                .join(" ")
                .as_bytes(),
        );
        h.update([0x1e]);
    }
    hex::encode(h.finalize())
}

/// Replays recorded continuations, picking the n-th for the n-th assistant turn.
#[derive(Debug, Clone)]
pub struct ScriptedPolicy {
    entries: HashMap<String, Vec<String>>,
    mode: ScriptedMode,
}

impl ScriptedPolicy {
    pub fn new(entries: Vec<FixtureEntry>, mode: ScriptedMode) -> Result<Self, PolicyError> {
        let mut map = HashMap::new();
        for e in entries {
            if map.insert(e.key.clone(), e.continuations).is_some() {
                return Err(PolicyError::DuplicateKey(e.key));
            }
        }
        Ok(Self { entries: map, mode })
    }

    pub fn load(path: &Path, mode: ScriptedMode) -> Result<Self, PolicyError> {
        let entries = read_jsonl(path).map_err(|e| PolicyError::Fixture {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::new(entries, mode)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl Policy for ScriptedPolicy {
    fn generate(&self, req: &GenerationRequest) -> Result<GenerationResponse, PolicyError> {
        let key = conversation_key(&req.messages);
        let index = req
            .messages
            .iter()
            .filter(|m| m.role == Role::Assistant)
            .count();
        let text = match (
            self.entries.get(&key).and_then(|c| c.get(index)),
            &self.mode,
        ) {
            (Some(t), _) => t.as_str(),
            (None, ScriptedMode::Fallback(t)) => t.as_str(),
            (None, ScriptedMode::Strict) => return Err(PolicyError::FixtureMissing { key, index }),
        };
        let (text, stopped) = apply_stop(text, &req.stop);
        let cut = truncate_units(text, req.max_new_units);
        let finish = if cut.len() < text.len() {
            FinishReason::Length
        } else if stopped {
            FinishReason::Stop
        } else {
            FinishReason::End
        };
        let prompt_units = req.messages.iter().map(|m| usage_units(&m.content)).sum();
        Ok(GenerationResponse {
            text: cut.to_string(),
            finish,
            usage: Usage {
                prompt_units,
                completion_units: usage_units(cut),
            },
        })
    }
}
