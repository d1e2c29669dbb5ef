use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::action::{Action, ActionKind, Verdict};
use super::build::{current_phase, plan, Planned};
use super::grammar::{transition, Phase};
use super::parse::{cut_after_tool_call, scan_tags, Tag};
use super::prompt::{render_prompt, render_user, system_prompt};
use super::trajectory::{trajectory_id, Origin, Segment, Termination, Trajectory, Violation};
use super::validate::validate_with;
use super::{EpisodeError, DEFAULT_MAX_TURNS};
use crate::db::{
    render_result_snippet, DatabaseRegistry, DbHandle, ExecLimits, ExecutionOutcome, SchemaInfo,
};
use crate::memory::{render_memory_verify_prompt, DialogueMemory, MemorySource};
use crate::policy::{usage_units, Message, Role};
use crate::sql::{normalize_sql, NormalizedSql};
use crate::task::DialogueTask;
use crate::templates::exec_sql_response;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EpisodeConfig {
    /// Tool calls allowed per episode.
    pub max_turns: usize,
    /// Response budget across all model emissions, in usage units.
    pub max_response_units: usize,
    /// Width of the execution snippet shown to the model.
    pub result_chars: usize,
    pub exec: ExecLimits,
    pub memory_source: MemorySource,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            max_turns: DEFAULT_MAX_TURNS,
            max_response_units: 8000,
            result_chars: 200,
            exec: ExecLimits::default(),
            memory_source: MemorySource::Gold,
        }
    }
}

/// What the environment says back after one model emission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReply {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation: Option<String>,
    pub terminal: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub termination: Option<Termination>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<Violation>,
}

/// Wraps an observation the way it appears in the exchange text.
pub fn tool_response_segment(observation: &str) -> String {
    format!("\n<tool_response>\n{observation}\n</tool_response>\n")
}

/// One live episode on one dialogue turn.
pub struct Episode {
    task: DialogueTask,
    task_id: String,
    sample: u32,
    config: EpisodeConfig,
    db: DbHandle,
    schema: Arc<SchemaInfo>,
    memory: DialogueMemory,
    system: String,
    user: String,
    segments: Vec<Segment>,
    /// Model emissions and observations in order, for rebuilding messages.
    turns: Vec<Message>,
    actions: Vec<Action>,
    observations: Vec<String>,
    interactions: usize,
    response_units: usize,
    termination: Option<Termination>,
    abort_reason: Option<String>,
    final_outcome: Option<ExecutionOutcome>,
    last_exec: Option<(NormalizedSql, ExecutionOutcome)>,
}

impl std::fmt::Debug for Episode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Episode")
            .field("task_id", &self.task_id)
            .field("actions", &self.actions.len())
            .field("termination", &self.termination)
            .finish()
    }
}

impl Episode {
    pub fn new(
        task: &DialogueTask,
        registry: &DatabaseRegistry,
        config: EpisodeConfig,
        sample: u32,
    ) -> Result<Self, EpisodeError> {
        let db = registry.open(&task.db_id)?;
        let schema = registry.schema(&task.db_id)?;
        let mut memory = DialogueMemory::new(task.dialogue_id.clone());
        let mut shown = Vec::with_capacity(task.history.len());
        for turn in &task.history {
            let raw = match (config.memory_source, &turn.predicted_sql) {
                (MemorySource::Predicted, Some(p)) => p.as_str(),
                _ => turn.gold_sql.as_str(),
            };
            let sql = normalize_sql(raw)?;
            let outcome = db.execute(sql.original(), config.exec);
            memory = memory.append_turn(&turn.question, &sql, &outcome, Some(&schema.schema))?;
            shown.push(raw);
        }
        let system = system_prompt().to_string();
        let user = render_user(&schema.prompt, &task.history, &shown, &task.question);
        let segments = vec![Segment {
            origin: Origin::Prompt,
            text: render_prompt(&system, &user),
        }];
        Ok(Self {
            task_id: task.id(),
            task: task.clone(),
            sample,
            config,
            db,
            schema,
            memory,
            system,
            user,
            segments,
            turns: Vec::new(),
            actions: Vec::new(),
            observations: Vec::new(),
            interactions: 0,
            response_units: 0,
            termination: None,
            abort_reason: None,
            final_outcome: None,
            last_exec: None,
        })
    }

    pub fn task(&self) -> &DialogueTask {
        &self.task
    }

    pub fn task_id(&self) -> &str {
        &self.task_id
    }

    pub fn memory(&self) -> &DialogueMemory {
        &self.memory
    }

    pub fn schema(&self) -> &SchemaInfo {
        &self.schema
    }

    pub fn prompt(&self) -> &str {
        &self.segments[0].text
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn observations(&self) -> &[String] {
        &self.observations
    }

    pub fn interactions(&self) -> usize {
        self.interactions
    }

    pub fn phase(&self) -> Phase {
        current_phase(&self.actions)
    }

    pub fn termination(&self) -> Option<Termination> {
        self.termination
    }

    pub fn is_terminal(&self) -> bool {
        self.termination.is_some()
    }

    pub fn remaining_units(&self) -> usize {
        self.config
            .max_response_units
            .saturating_sub(self.response_units)
    }

    /// Chat view of the exchange so far.
    pub fn messages(&self) -> Vec<Message> {
        let mut m = vec![
            Message::new(Role::System, self.system.clone()),
            Message::new(Role::User, self.user.clone()),
        ];
        m.extend(self.turns.iter().cloned());
        m
    }

    /// Feeds one model emission and returns the environment reply.
    ///
    /// Text after the first complete tool call is dropped, since the model
    /// could not have seen the result yet.
    pub fn step(&mut self, model_text: &str) -> Result<StepReply, EpisodeError> {
        if self.is_terminal() {
            return Err(EpisodeError::AlreadyTerminal);
        }
        let before = self.violations().len();
        let text = cut_after_tool_call(model_text);
        self.segments.push(Segment {
            origin: Origin::Model,
            text: text.to_string(),
        });
        self.turns.push(Message::new(Role::Assistant, text));
        self.response_units += usage_units(text);

        let mut observation = None;
        if self.response_units > self.config.max_response_units {
            self.terminate(Termination::MaxLength);
        } else {
            match scan_tags(text) {
                Ok(tags) if tags.iter().any(Tag::is_action) => observation = self.apply_tags(&tags),
                _ => self.terminate(Termination::ParseFailure),
            }
        }
        if let Some(obs) = &observation {
            self.push_observation(obs);
        }
        let mut violations = self.violations();
        violations.drain(..before.min(violations.len()));
        Ok(StepReply {
            observation,
            terminal: self.is_terminal(),
            termination: self.termination,
            violations,
        })
    }

    fn apply_tags(&mut self, tags: &[Tag]) -> Option<String> {
        let mut thought = String::new();
        let mut observation = None;
        for tag in tags {
            if let Tag::Think(t) = tag {
                if !thought.is_empty() {
                    thought.push('\n');
                }
                thought.push_str(t);
                continue;
            }
            let last_sql = self.actions.iter().rev().find_map(|a| a.sql.clone());
            let steps = match plan(tag, self.phase(), last_sql.as_ref()) {
                Ok(s) => s,
                Err(_) => {
                    self.terminate(Termination::ParseFailure);
                    return observation;
                }
            };
            for (i, step) in steps.into_iter().enumerate() {
                match step {
                    Planned::Resolve { verdict, implicit } => self.resolve(verdict, implicit),
                    Planned::Act(mut action) => {
                        if i == 0 {
                            action.thought = std::mem::take(&mut thought);
                        }
                        match self.commit(action) {
                            Ok(Some(obs)) => observation = Some(obs),
                            Ok(None) => {}
                            Err(_) => self.terminate(Termination::MaxInteractions),
                        }
                    }
                }
                if self.is_terminal() {
                    return observation;
                }
            }
        }
        observation
    }

    /// Applies one typed action, rejecting anything the grammar forbids.
    pub fn apply_action(&mut self, action: Action) -> Result<Option<String>, EpisodeError> {
        if self.is_terminal() {
            return Err(EpisodeError::AlreadyTerminal);
        }
        let phase = self.phase();
        if phase == Phase::AwaitMVerdict {
            return match (action.kind, action.verdict) {
                (ActionKind::MVerify, Some(v)) => {
                    self.resolve(v, action.implicit);
                    Ok(None)
                }
                _ => Err(EpisodeError::IllegalTransition {
                    kind: action.kind,
                    legal: phase.legal(),
                }),
            };
        }
        let needs_sql = matches!(
            action.kind,
            ActionKind::Propose
                | ActionKind::SelfCorrect
                | ActionKind::Execute
                | ActionKind::Finalize
        );
        if transition(phase, action.kind, action.verdict).is_none()
            || (needs_sql && action.sql.is_none())
        {
            return Err(EpisodeError::IllegalTransition {
                kind: action.kind,
                legal: phase.legal(),
            });
        }
        let obs = self.commit(action)?;
        if let Some(o) = &obs {
            self.push_observation(o);
        }
        Ok(obs)
    }

    fn commit(&mut self, mut action: Action) -> Result<Option<String>, EpisodeError> {
        let is_request = action.kind == ActionKind::Execute
            || (action.kind == ActionKind::MVerify && action.verdict.is_none());
        if is_request {
            if self.interactions >= self.config.max_turns {
                return Err(EpisodeError::InteractionBudgetExceeded(
                    self.config.max_turns,
                ));
            }
            self.interactions += 1;
        }
        let mut observation = None;
        match action.kind {
            ActionKind::Execute => {
                let sql = action.sql.clone().expect("EXECUTE carries SQL");
                let outcome = self.db.execute(sql.original(), self.config.exec);
                action.exec_class = Some(outcome.status);
                let snippet = render_result_snippet(&outcome, self.config.result_chars);
                observation = Some(exec_sql_response(
                    &self.task.question,
                    sql.original(),
                    &snippet,
                ));
                self.last_exec = Some((sql, outcome));
            }
            ActionKind::MVerify if is_request => {
                let candidate = action
                    .sql
                    .clone()
                    .or_else(|| self.last_exec.as_ref().map(|(s, _)| s.clone()));
                let snippet = match &candidate {
                    Some(sql) => {
                        let outcome = match &self.last_exec {
                            Some((s, o)) if s.original() == sql.original() => o.clone(),
                            _ => self.db.execute(sql.original(), self.config.exec),
                        };
                        render_result_snippet(&outcome, self.config.result_chars)
                    }
                    None => String::new(),
                };
                let code = candidate.as_ref().map_or("", |s| s.original());
                action.sql = candidate.clone();
                observation = Some(render_memory_verify_prompt(
                    &self.memory,
                    &self.task.question,
                    code,
                    &snippet,
                ));
            }
            ActionKind::Finalize => {
                let sql = action.sql.clone().expect("FINALIZE carries SQL");
                self.final_outcome = Some(self.db.execute(sql.original(), self.config.exec));
                self.termination = Some(Termination::Finalized);
            }
            _ => {}
        }
        self.actions.push(action);
        Ok(observation)
    }

    fn resolve(&mut self, verdict: Verdict, implicit: bool) {
        if let Some(last) = self.actions.last_mut() {
            last.verdict = Some(verdict);
            last.implicit = implicit;
        }
    }

    fn push_observation(&mut self, obs: &str) {
        self.observations.push(obs.to_string());
        self.segments.push(Segment {
            origin: Origin::Environment,
            text: tool_response_segment(obs),
        });
        self.turns.push(Message::new(Role::Tool, obs));
    }

    fn terminate(&mut self, why: Termination) {
        if self.termination.is_none() {
            self.termination = Some(why);
        }
    }

    /// Ends the episode because the policy could not answer.
    pub fn abort(&mut self, reason: impl Into<String>) {
        self.abort_reason = Some(reason.into());
        self.terminate(Termination::Aborted);
    }

    pub fn violations(&self) -> Vec<Violation> {
        validate_with(&self.snapshot(), self.config.max_turns)
    }

    fn snapshot(&self) -> Trajectory {
        let final_sql = match self.termination {
            Some(Termination::Finalized) => self.actions.last().and_then(|a| a.sql.clone()),
            _ => None,
        };
        Trajectory {
            id: trajectory_id(&self.task_id, self.sample, &self.segments),
            task_id: self.task_id.clone(),
            sample: self.sample,
            segments: self.segments.clone(),
            actions: self.actions.clone(),
            final_sql,
            final_outcome: self.final_outcome.clone(),
            termination: self.termination.unwrap_or(Termination::Aborted),
            violations: Vec::new(),
            interactions: self.interactions,
            response_units: self.response_units,
            abort_reason: self.abort_reason.clone(),
        }
    }

    /// Closes the episode; one still running is recorded as aborted.
    pub fn into_trajectory(mut self) -> Trajectory {
        if self.termination.is_none() {
            self.abort("episode closed before termination");
        }
        let mut t = self.snapshot();
        t.violations = validate_with(&t, self.config.max_turns);
        t
    }
}
