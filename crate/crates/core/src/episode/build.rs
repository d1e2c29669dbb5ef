use super::action::{Action, ActionKind, Verdict};
use super::grammar::{phase_of, Phase};
use super::parse::{scan_tags, Tag, TagParseError};
use crate::sql::{normalize_sql, NormalizedSql};
use crate::templates::EXEC_SQL;

/// Effect of one tag on the action list.
#[derive(Debug, Clone, PartialEq)]
pub enum Planned {
    Act(Action),
    /// Fills in the verdict of the pending M_VERIFY request.
    Resolve {
        verdict: Verdict,
        implicit: bool,
    },
}

/// Phase implied by the last action, ignoring whether it was legal.
pub fn current_phase(actions: &[Action]) -> Phase {
    actions
        .last()
        .map_or(Phase::Start, |a| phase_of(a.kind, a.verdict))
}

fn sql(code: &str) -> Result<NormalizedSql, TagParseError> {
    normalize_sql(code).map_err(|_| TagParseError::EmptySql)
}

fn implied(kind: ActionKind, verdict: Verdict) -> Action {
    Action {
        implicit: true,
        ..Action::verdict(kind, verdict)
    }
}

/// Maps one action tag to typed actions, inferring verdicts the model left
/// unstated from what it did next.
pub fn plan(
    tag: &Tag,
    phase: Phase,
    last_sql: Option<&NormalizedSql>,
) -> Result<Vec<Planned>, TagParseError> {
    use Planned::{Act, Resolve};
    let mut out = Vec::new();
    match tag {
        Tag::Think(_) => {}
        Tag::ToolCall { name, code } if name == EXEC_SQL => {
            let code = sql(code)?;
            match phase {
                Phase::NeedEVerify => out.push(Act(implied(ActionKind::EVerify, Verdict::Fail))),
                Phase::AwaitMVerdict => out.push(Resolve {
                    verdict: Verdict::Fail,
                    implicit: true,
                }),
                _ => {}
            }
            let kind = if phase == Phase::Start {
                ActionKind::Propose
            } else {
                ActionKind::SelfCorrect
            };
            out.push(Act(Action::with_sql(kind, code.clone())));
            out.push(Act(Action::with_sql(ActionKind::Execute, code)));
        }
        Tag::ToolCall { code, .. } => {
            if phase == Phase::NeedEVerify {
                out.push(Act(implied(ActionKind::EVerify, Verdict::Pass)));
            }
            out.push(Act(Action::with_sql(ActionKind::MVerify, sql(code)?)));
        }
        Tag::ExecVerify(v) => out.push(Act(Action::verdict(ActionKind::EVerify, *v))),
        Tag::MemoryVerify(v) if phase == Phase::AwaitMVerdict => out.push(Resolve {
            verdict: *v,
            implicit: false,
        }),
        Tag::MemoryVerify(v) => {
            out.push(Act(Action {
                sql: last_sql.cloned(),
                ..Action::verdict(ActionKind::MVerify, *v)
            }));
        }
        Tag::Answer(text) => {
            match phase {
                Phase::NeedEVerify => out.push(Act(implied(ActionKind::EVerify, Verdict::Pass))),
                Phase::AwaitMVerdict => out.push(Resolve {
                    verdict: Verdict::Pass,
                    implicit: true,
                }),
                _ => {}
            }
            out.push(Act(Action::with_sql(ActionKind::Finalize, sql(text)?)));
        }
    }
    Ok(out)
}

/// Applies planned effects to `actions` without running anything.
pub fn extend_actions(actions: &mut Vec<Action>, tags: &[Tag]) -> Result<(), TagParseError> {
    let mut thought = String::new();
    for tag in tags {
        if let Tag::Think(t) = tag {
            if !thought.is_empty() {
                thought.push('\n');
            }
            thought.push_str(t);
            continue;
        }
        let last_sql = actions.iter().rev().find_map(|a| a.sql.clone());
        for (i, step) in plan(tag, current_phase(actions), last_sql.as_ref())?
            .into_iter()
            .enumerate()
        {
            match step {
                Planned::Act(mut a) => {
                    if i == 0 {
                        a.thought = std::mem::take(&mut thought);
                    }
                    actions.push(a);
                }
                Planned::Resolve { verdict, implicit } => {
                    let last = actions.last_mut().expect("pending request exists");
                    last.verdict = Some(verdict);
                    last.implicit = implicit;
                }
            }
        }
    }
    Ok(())
}

/// Actions expressed by one model emission at the start of an episode.
pub fn parse_model_output(text: &str) -> Result<Vec<Action>, TagParseError> {
    parse_model_output_after(text, &[])
}

/// Actions expressed by one emission, given the actions taken so far.
pub fn parse_model_output_after(
    text: &str,
    history: &[Action],
) -> Result<Vec<Action>, TagParseError> {
    let tags = scan_tags(text)?;
    let mut actions = history.to_vec();
    extend_actions(&mut actions, &tags)?;
    Ok(actions.split_off(history.len().min(actions.len())))
}
