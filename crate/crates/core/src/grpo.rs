//! Group-normalized advantages, loss masks and the clipped surrogate value.

use serde::{Deserialize, Serialize};

use crate::episode::{Origin, Trajectory};

pub const DEFAULT_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardGroup {
    pub rewards: Vec<f64>,
    pub epsilon: f64,
}

impl RewardGroup {
    pub fn new(rewards: Vec<f64>) -> Self {
        Self {
            rewards,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

/// `(r - mean) / (population std + epsilon)` for each reward.
///
/// Rewards are taken relative to the first one before averaging, so adding a
/// constant to every reward leaves the result bit-identical whenever the
/// shifted rewards are exact.
pub fn group_advantages(group: &RewardGroup) -> Vec<f64> {
    let Some(&pivot) = group.rewards.first() else {
        return Vec::new();
    };
    let g = group.rewards.len() as f64;
    let d: Vec<f64> = group.rewards.iter().map(|r| r - pivot).collect();
    let mean = d.iter().sum::<f64>() / g;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / g;
    let denom = var.sqrt() + group.epsilon;
    d.iter().map(|x| (x - mean) / denom).collect()
}

/// Half-open character spans into the flattened trajectory text.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MaskSpans {
    pub spans: Vec<(usize, usize)>,
}

impl MaskSpans {
    pub fn covered(&self) -> usize {
        self.spans.iter().map(|(a, b)| b - a).sum()
    }

    pub fn contains(&self, pos: usize) -> bool {
        self.spans.iter().any(|&(a, b)| a <= pos && pos < b)
    }

    /// Position flags for a sequence of `len` characters.
    pub fn to_flags(&self, len: usize) -> Vec<bool> {
        let mut flags = vec![false; len];
        for &(a, b) in &self.spans {
            for f in flags.iter_mut().take(b.min(len)).skip(a) {
                *f = true;
            }
        }
        flags
    }
}

/// Spans covering exactly the model-written segments. Adjacent model
/// segments merge; empty ones contribute nothing.
pub fn build_loss_mask(traj: &Trajectory) -> MaskSpans {
    let mut spans: Vec<(usize, usize)> = Vec::new();
    for (origin, r) in traj.spans() {
        if origin != Origin::Model || r.is_empty() {
            continue;
        }
        match spans.last_mut() {
            Some(last) if last.1 == r.start => last.1 = r.end,
            _ => spans.push((r.start, r.end)),
        }
    }
    MaskSpans { spans }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Mean over each trajectory's masked positions, then over trajectories.
    PerTrajectory,
    /// Mean over all masked positions of the group.
    Global,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GrpoError {
    #[error("length mismatch: {what} has {got}, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },
}

/// Per-trajectory inputs for one objective evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicySample<'a> {
    pub logp_new: &'a [f64],
    pub logp_old: &'a [f64],
    pub logp_ref: &'a [f64],
    pub advantage: f64,
    pub mask: &'a [bool],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveValue {
    pub value: f64,
    /// No position was masked in, so the value is a vacuous 0.
    pub empty_mask: bool,
}

fn position_term(new: f64, old: f64, reference: f64, adv: f64, clip_eps: f64, beta: f64) -> f64 {
    let ratio = (new - old).exp();
    let clipped = ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps);
    let surrogate = (ratio * adv).min(clipped * adv);
    let r = (reference - new).exp();
    surrogate - beta * (r - (reference - new) - 1.0)
}

fn check(what: &'static str, got: usize, expected: usize) -> Result<(), GrpoError> {
    if got == expected {
        Ok(())
    } else {
        Err(GrpoError::DimensionMismatch {
            what,
            got,
            expected,
        })
    }
}

/// Clipped surrogate with a KL penalty, averaged over masked positions of a
/// single trajectory.
pub fn masked_objective(
    logp_new: &[f64],
    logp_old: &[f64],
    logp_ref: &[f64],
    advantage: f64,
    mask: &[bool],
    clip_eps: f64,
    beta: f64,
) -> Result<ObjectiveValue, GrpoError> {
    let s = PolicySample {
        logp_new,
        logp_old,
        logp_ref,
        advantage,
        mask,
    };
    group_objective(&[s], clip_eps, beta, Normalization::PerTrajectory)
}

/// Objective over a group of trajectories.
pub fn group_objective(
    samples: &[PolicySample<'_>],
    clip_eps: f64,
    beta: f64,
    norm: Normalization,
) -> Result<ObjectiveValue, GrpoError> {
    let mut per_traj = Vec::new();
    let (mut total, mut count) = (0.0, 0usize);
    for s in samples {
        let n = s.logp_new.len();
        check("logp_old", s.logp_old.len(), n)?;
        check("logp_ref", s.logp_ref.len(), n)?;
        check("mask", s.mask.len(), n)?;
        let (mut sum, mut k) = (0.0, 0usize);
        for i in (0..n).filter(|&i| s.mask[i]) {
            sum += position_term(
                s.logp_new[i],
                s.logp_old[i],
                s.logp_ref[i],
                s.advantage,
                clip_eps,
                beta,
            );
            k += 1;
        }
        total += sum;
        count += k;
        if k > 0 {
            per_traj.push(sum / k as f64);
        }
    }
    if count == 0 {
        log::warn!("objective over an empty mask");
        return Ok(ObjectiveValue {
            value: 0.0,
            empty_mask: true,
        });
    }
    let value = match norm {
        Normalization::PerTrajectory => per_traj.iter().sum::<f64>() / samples.len() as f64,
        Normalization::Global => total / count as f64,
    };
    Ok(ObjectiveValue {
        value,
        empty_mask: false,
    })
}

/// Advantage and mask record handed to an external trainer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvantageRecord {
    pub trajectory_id: String,
    pub advantage: f64,
    pub mask_spans: Vec<(usize, usize)>,
}

pub fn advantage_records(
    group: &[&Trajectory],
    rewards: &[f64],
    epsilon: f64,
) -> Vec<AdvantageRecord> {
    let adv = group_advantages(&RewardGroup {
        rewards: rewards.to_vec(),
        epsilon,
    });
    group
        .iter()
        .zip(adv)
        .map(|(t, a)| AdvantageRecord {
            trajectory_id: t.id.clone(),
            advantage: a,
            mask_spans: build_loss_mask(t).spans,
        })
        .collect()
}
