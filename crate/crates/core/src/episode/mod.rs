//! Episode engine: action grammar, tag parsing, environment stepping.

use std::collections::BTreeSet;

pub mod action;
pub mod build;
pub mod engine;
pub mod grammar;
pub mod parse;
pub mod prompt;
pub mod trajectory;
pub mod validate;

pub use action::{Action, ActionKind, Verdict};
pub use build::{parse_model_output, parse_model_output_after};
pub use engine::{tool_response_segment, Episode, EpisodeConfig, StepReply};
pub use grammar::{legal_next, IllegalHistory, Phase};
pub use parse::{scan_tags, Tag, TagParseError};
pub use trajectory::{Origin, Segment, Termination, Trajectory, Violation, ViolationKind};
pub use validate::{validate_trajectory, validate_with};

use crate::db::{DatabaseRegistry, DbError};
use crate::memory::MemoryError;
use crate::policy::{GenerationRequest, Policy, TOOL_CALL_STOP};
use crate::sql::SqlError;
use crate::task::DialogueTask;

pub const DEFAULT_MAX_TURNS: usize = 4;

#[derive(Debug, thiserror::Error)]
pub enum EpisodeError {
    #[error(transparent)]
    Db(#[from] DbError),
    #[error("history SQL: {0}")]
    Sql(#[from] SqlError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error("{kind} is not legal here; legal next actions: {legal:?}")]
    IllegalTransition {
        kind: ActionKind,
        legal: BTreeSet<ActionKind>,
    },
    #[error("tool call budget of {0} exhausted")]
    InteractionBudgetExceeded(usize),
    #[error("episode already terminated")]
    AlreadyTerminal,
}

/// Sampling settings for one rollout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sampling {
    pub temperature: f64,
    pub seed: u64,
    pub sample: u32,
}

impl Default for Sampling {
    fn default() -> Self {
        Self {
            temperature: 0.7,
            seed: 0,
            sample: 0,
        }
    }
}

/// Drives a policy through one episode to termination.
///
/// Policy failures end the episode as aborted rather than erroring.
pub fn run_episode<P: Policy + ?Sized>(
    policy: &P,
    task: &DialogueTask,
    registry: &DatabaseRegistry,
    config: EpisodeConfig,
    sampling: Sampling,
) -> Result<Trajectory, EpisodeError> {
    let mut ep = Episode::new(task, registry, config, sampling.sample)?;
    while !ep.is_terminal() {
        let request = GenerationRequest {
            messages: ep.messages(),
            temperature: sampling.temperature,
            max_new_units: ep.remaining_units().max(1),
            seed: sampling.seed,
            stop: vec![TOOL_CALL_STOP.to_string()],
        };
        match policy.generate(&request) {
            Ok(resp) => {
                ep.step(&resp.text)?;
            }
            Err(e) => ep.abort(e.to_string()),
        }
    }
    Ok(ep.into_trajectory())
}
