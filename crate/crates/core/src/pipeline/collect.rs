use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::pool::TaskPool;
use crate::db::DatabaseRegistry;
use crate::episode::{run_episode, EpisodeConfig, Sampling, Termination, Trajectory};
use crate::policy::Policy;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CollectConfig {
    pub rollouts: u32,
    pub temperature: f64,
    pub seed: u64,
    pub workers: usize,
    /// Filled from the top-level episode section of a run config.
    #[serde(skip)]
    pub episode: EpisodeConfig,
}

impl Default for CollectConfig {
    fn default() -> Self {
        Self {
            rollouts: 20,
            temperature: 0.7,
            seed: 0,
            workers: 4,
            episode: EpisodeConfig::default(),
        }
    }
}

/// Raw output of one collection round.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Collected {
    pub trajectories: Vec<Trajectory>,
    /// Tasks that could not be rolled out this round, with the reason.
    pub skipped: BTreeMap<String, String>,
}

/// Per-rollout seed derived from the run seed, round, task and sample index.
pub fn rollout_seed(seed: u64, round: usize, task_id: &str, sample: u32) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((round as u64).to_le_bytes());
    h.update(task_id.as_bytes());
    h.update(sample.to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("eight bytes"))
}

/// Runs `rollouts` episodes per task on a bounded worker pool.
///
/// Every attempt yields a trajectory or a skip reason. A task whose policy
/// fails on any rollout is marked skipped, but its trajectories are kept.
pub fn collect_rollouts<P: Policy + ?Sized>(
    pool: &TaskPool,
    policy: &P,
    registry: &DatabaseRegistry,
    config: &CollectConfig,
) -> Collected {
    let jobs: Vec<(&str, u32)> = pool
        .tasks()
        .flat_map(|(id, _)| (0..config.rollouts).map(move |s| (id, s)))
        .collect();
    let run = || {
        jobs.par_iter()
            .map(|&(id, sample)| {
                let task = pool.get(id).expect("job ids come from the pool");
                let sampling = Sampling {
                    temperature: config.temperature,
                    seed: rollout_seed(config.seed, pool.round, id, sample),
                    sample,
                };
                (
                    id,
                    run_episode(policy, task, registry, config.episode, sampling),
                )
            })
            .collect::<Vec<_>>()
    };
    let results = match rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.max(1))
        .build()
    {
        Ok(tp) => tp.install(run),
        Err(_) => run(),
    };

    let mut out = Collected::default();
    for (id, r) in results {
        match r {
            Ok(t) => {
                if t.termination == Termination::Aborted {
                    let why = t.abort_reason.clone().unwrap_or_default();
                    out.skipped.entry(id.to_string()).or_insert(why);
                }
                out.trajectories.push(t);
            }
            Err(e) => {
                out.skipped
                    .entry(id.to_string())
                    .or_insert_with(|| e.to_string());
            }
        }
    }
    out
}
