use super::action::ActionKind;
use super::grammar::{phase_of, transition, Phase};
use super::parse::scan_tags;
use super::trajectory::{Trajectory, Violation, ViolationKind};
use super::DEFAULT_MAX_TURNS;

pub fn validate_trajectory(t: &Trajectory) -> Vec<Violation> {
    validate_with(t, DEFAULT_MAX_TURNS)
}

/// Re-checks a finished trajectory against the action grammar, the tool
/// budget and the tag grammar of every model emission.
///
/// After an illegal step the check resumes from the phase that step leads
/// to, so one bad move yields one violation.
pub fn validate_with(t: &Trajectory, max_turns: usize) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut phase = Phase::Start;
    let last = t.actions.len().saturating_sub(1);
    for (i, a) in t.actions.iter().enumerate() {
        let pending_ok = a.kind == ActionKind::MVerify && a.verdict.is_none() && i == last;
        match transition(phase, a.kind, a.verdict) {
            Some(next) if a.verdict.is_some() || !a.kind.is_verify() || pending_ok => phase = next,
            _ => {
                let what = match a.verdict {
                    Some(v) => format!("{}({v:?})", a.kind),
                    None => a.kind.to_string(),
                };
                out.push(Violation {
                    kind: ViolationKind::IllegalTransition,
                    index: Some(i),
                    message: format!(
                        "{what} not allowed here; expected one of {:?}",
                        phase.legal()
                    ),
                });
                phase = phase_of(a.kind, a.verdict);
            }
        }
    }

    let calls: Vec<usize> = t
        .actions
        .iter()
        .enumerate()
        .filter(|(_, a)| a.kind.is_tool_call())
        .map(|(i, _)| i)
        .collect();
    if calls.len() > max_turns {
        out.push(Violation {
            kind: ViolationKind::Budget,
            index: Some(calls[max_turns]),
            message: format!(
                "{} tool calls exceed the budget of {max_turns}",
                calls.len()
            ),
        });
    }

    for (i, text) in t.model_segments().enumerate() {
        match scan_tags(text) {
            Err(e) => out.push(Violation {
                kind: ViolationKind::TagGrammar,
                index: Some(i),
                message: e.to_string(),
            }),
            Ok(tags) if !tags.iter().any(|t| t.is_action()) => out.push(Violation {
                kind: ViolationKind::TagGrammar,
                index: Some(i),
                message: "emission contains no action tag".into(),
            }),
            Ok(_) => {}
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::episode::action::{Action, Verdict};
    use crate::sql::normalize_sql;

    fn act(kind: ActionKind, v: Option<Verdict>) -> Action {
        let mut a = Action::new(kind);
        a.verdict = v;
        if matches!(
            kind,
            ActionKind::Propose
                | ActionKind::SelfCorrect
                | ActionKind::Execute
                | ActionKind::Finalize
        ) {
            a.sql = Some(normalize_sql("SELECT 1").unwrap());
        }
        a
    }

    #[test]
    fn verify_before_execute() {
        let t = Trajectory::from_actions(vec![
            act(ActionKind::EVerify, Some(Verdict::Pass)),
            act(ActionKind::MVerify, Some(Verdict::Pass)),
            act(ActionKind::Finalize, None),
        ]);
        let v = validate_trajectory(&t);
        assert_eq!(v.len(), 1);
        assert_eq!(
            (v[0].kind, v[0].index),
            (ViolationKind::IllegalTransition, Some(0))
        );
    }

    #[test]
    fn five_tool_calls() {
        use ActionKind::*;
        let fail = Some(Verdict::Fail);
        let mut acts = vec![act(Propose, None), act(Execute, None)];
        for _ in 0..4 {
            acts.extend([
                act(EVerify, fail),
                act(SelfCorrect, None),
                act(Execute, None),
            ]);
        }
        let v = validate_trajectory(&Trajectory::from_actions(acts));
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::Budget);
    }

    #[test]
    fn pending_request_only_at_end() {
        use ActionKind::*;
        let pass = Some(Verdict::Pass);
        let base = vec![
            act(Propose, None),
            act(Execute, None),
            act(EVerify, pass),
            act(MVerify, None),
        ];
        assert!(validate_trajectory(&Trajectory::from_actions(base.clone())).is_empty());
        let mut more = base;
        more.push(act(Finalize, None));
        assert_eq!(
            validate_trajectory(&Trajectory::from_actions(more))[0].index,
            Some(3)
        );
    }
}
