use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::collect::rollout_seed;
use super::embed::{k_medoids, Embedder, HashingEmbedder};
use crate::episode::{Origin, Trajectory};
use crate::reward::{score_trajectory, GoldReference, RewardBreakdown, RewardWeights};
use crate::sql::Hardness;

/// A trajectory with its reward, tagged with the round that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoredTrajectory {
    pub task_id: String,
    pub round: usize,
    pub trajectory: Trajectory,
    pub reward: RewardBreakdown,
}

impl ScoredTrajectory {
    /// Exact and execution match, reached through a well-formed episode.
    pub fn is_valid(&self) -> bool {
        self.reward.r_em == 1.0 && self.reward.r_ex == 1.0 && self.trajectory.violations.is_empty()
    }
}

pub fn score_all(
    raw: &[Trajectory],
    golds: &HashMap<String, GoldReference>,
    weights: &RewardWeights,
    round: usize,
) -> Vec<ScoredTrajectory> {
    raw.iter()
        .filter_map(|t| {
            let gold = golds.get(&t.task_id)?;
            Some(ScoredTrajectory {
                task_id: t.task_id.clone(),
                round,
                trajectory: t.clone(),
                reward: score_trajectory(t, gold, weights),
            })
        })
        .collect()
}

/// Keeps trajectories whose final SQL matches gold both exactly and by
/// execution.
pub fn filter_valid(scored: &[ScoredTrajectory]) -> Vec<ScoredTrajectory> {
    scored.iter().filter(|s| s.is_valid()).cloned().collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuccessProfile {
    pub task_id: String,
    pub successes: u32,
    pub rollouts: u32,
}

impl SuccessProfile {
    pub fn solved_every_time(&self) -> bool {
        self.rollouts > 0 && self.successes >= self.rollouts
    }
}

/// Success counts per task over the scored rollouts of one round.
pub fn success_profiles(scored: &[ScoredTrajectory]) -> Vec<SuccessProfile> {
    let mut map: BTreeMap<&str, (u32, u32)> = BTreeMap::new();
    for s in scored {
        let e = map.entry(&s.task_id).or_default();
        e.1 += 1;
        if s.is_valid() {
            e.0 += 1;
        }
    }
    map.into_iter()
        .map(|(id, (ok, n))| SuccessProfile {
            task_id: id.to_string(),
            successes: ok,
            rollouts: n,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RejectConfig {
    pub easy_keep: usize,
    pub easy_max_interactions: usize,
    pub hard_keep: usize,
    pub hard_min_interactions: usize,
    pub seed: u64,
    pub embedder: HashingEmbedder,
}

impl Default for RejectConfig {
    fn default() -> Self {
        Self {
            easy_keep: 2,
            easy_max_interactions: 2,
            hard_keep: 3,
            hard_min_interactions: 2,
            seed: 0,
            embedder: HashingEmbedder::default(),
        }
    }
}

/// Text used to compare trajectories: everything after the shared prompt.
pub fn behaviour_text(t: &Trajectory) -> String {
    t.segments
        .iter()
        .filter(|s| s.origin != Origin::Prompt)
        .map(|s| s.text.as_str())
        .collect()
}

/// Difficulty-aware selection among one task's valid trajectories.
///
/// Easy or always-solved tasks keep up to `easy_keep` short trajectories
/// drawn at random; the rest keep the medoids of up to `hard_keep` clusters
/// of long trajectories.
pub fn reject_sample(
    valid: &[ScoredTrajectory],
    hardness: Hardness,
    profile: &SuccessProfile,
    embedder: &dyn Embedder,
    config: &RejectConfig,
) -> Vec<ScoredTrajectory> {
    if hardness == Hardness::Easy || profile.solved_every_time() {
        let mut short: Vec<&ScoredTrajectory> = valid
            .iter()
            .filter(|s| s.trajectory.interactions <= config.easy_max_interactions)
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(rollout_seed(config.seed, 0, &profile.task_id, 0));
        short.shuffle(&mut rng);
        short.truncate(config.easy_keep);
        short.sort_by_key(|s| s.trajectory.sample);
        return short.into_iter().cloned().collect();
    }
    let long: Vec<&ScoredTrajectory> = valid
        .iter()
        .filter(|s| s.trajectory.interactions >= config.hard_min_interactions)
        .collect();
    let texts: Vec<String> = long.iter().map(|s| behaviour_text(&s.trajectory)).collect();
    let points: Vec<Vec<f64>> = match texts
        .iter()
        .map(|t| embedder.embed(t))
        .collect::<Result<_, _>>()
    {
        Ok(p) => p,
        Err(e) => {
            log::warn!("{e}; using the hashing embedder for {}", profile.task_id);
            texts.iter().map(|t| config.embedder.vector(t)).collect()
        }
    };
    k_medoids(&points, config.hard_keep)
        .into_iter()
        .map(|i| long[i].clone())
        .collect()
}
