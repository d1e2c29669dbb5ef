use std::collections::BTreeSet;

use super::action::{ActionKind, Verdict};

/// Where an episode stands in the action grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Start,
    /// After PROPOSE or SELF_CORRECT.
    NeedExecute,
    /// After EXECUTE.
    NeedEVerify,
    /// After E_VERIFY(pass).
    NeedMVerify,
    /// M_VERIFY requested, verdict not yet given.
    AwaitMVerdict,
    /// After a failed verification.
    NeedCorrect,
    /// After M_VERIFY(pass).
    NeedFinalize,
    Done,
}

impl Phase {
    pub fn legal(self) -> BTreeSet<ActionKind> {
        use ActionKind::*;
        let kinds: &[ActionKind] = match self {
            Phase::Start => &[Propose],
            Phase::NeedExecute => &[Execute],
            Phase::NeedEVerify => &[EVerify],
            Phase::NeedMVerify | Phase::AwaitMVerdict => &[MVerify],
            Phase::NeedCorrect => &[SelfCorrect],
            Phase::NeedFinalize => &[Finalize],
            Phase::Done => &[],
        };
        kinds.iter().copied().collect()
    }
}

/// Phase reached by taking `kind` regardless of where the episode was.
pub fn phase_of(kind: ActionKind, verdict: Option<Verdict>) -> Phase {
    match (kind, verdict) {
        (ActionKind::Propose | ActionKind::SelfCorrect, _) => Phase::NeedExecute,
        (ActionKind::Execute, _) => Phase::NeedEVerify,
        (ActionKind::EVerify, Some(Verdict::Pass)) => Phase::NeedMVerify,
        (ActionKind::EVerify, _) => Phase::NeedCorrect,
        (ActionKind::MVerify, None) => Phase::AwaitMVerdict,
        (ActionKind::MVerify, Some(Verdict::Pass)) => Phase::NeedFinalize,
        (ActionKind::MVerify, Some(Verdict::Fail)) => Phase::NeedCorrect,
        (ActionKind::Finalize, _) => Phase::Done,
    }
}

/// Next phase if the step is legal.
pub fn transition(phase: Phase, kind: ActionKind, verdict: Option<Verdict>) -> Option<Phase> {
    if kind.is_verify()
        && verdict.is_none()
        && !(kind == ActionKind::MVerify && phase == Phase::NeedMVerify)
    {
        return None;
    }
    if !kind.is_verify() && verdict.is_some() {
        return None;
    }
    if phase == Phase::AwaitMVerdict {
        return None;
    }
    phase
        .legal()
        .contains(&kind)
        .then(|| phase_of(kind, verdict))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("illegal {kind} at position {index}")]
pub struct IllegalHistory {
    pub index: usize,
    pub kind: ActionKind,
}

pub fn phase_after(history: &[(ActionKind, Option<Verdict>)]) -> Result<Phase, IllegalHistory> {
    let mut phase = Phase::Start;
    for (index, &(kind, verdict)) in history.iter().enumerate() {
        phase = transition(phase, kind, verdict).ok_or(IllegalHistory { index, kind })?;
    }
    Ok(phase)
}

pub fn legal_next(
    history: &[(ActionKind, Option<Verdict>)],
) -> Result<BTreeSet<ActionKind>, IllegalHistory> {
    phase_after(history).map(Phase::legal)
}
