//! Self-taught trajectory collection with difficulty-aware selection, and
//! curriculum binning for RL.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub mod collect;
pub mod curriculum;
pub mod embed;
pub mod export;
pub mod pool;
pub mod select;

pub use collect::{collect_rollouts, rollout_seed, CollectConfig, Collected};
pub use curriculum::{curriculum_bins, write_curriculum, CurriculumRecord, DEFAULT_BIN_SIZE};
pub use embed::{cosine_distance, k_medoids, Embedder, EmbedderUnavailable, HashingEmbedder};
pub use export::{export_sft, import_sft, SftMetadata, SftRecord, StoreEntry};
pub use pool::{update_pool, TaskPool};
pub use select::{
    behaviour_text, filter_valid, reject_sample, score_all, success_profiles, RejectConfig,
    ScoredTrajectory, SuccessProfile,
};

use crate::db::{DatabaseRegistry, DbError};
use crate::episode::Trajectory;
use crate::policy::Policy;
use crate::reward::{GoldReference, RewardWeights};
use crate::sql::{classify_hardness, Hardness};
use crate::task::{read_jsonl, write_jsonl, DialogueTask, JsonlError};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("duplicate task id {0}")]
    DuplicateTaskId(String),
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
    #[error(transparent)]
    Db(#[from] DbError),
    #[error("journal {path}: {reason}")]
    Journal { path: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub rounds: usize,
    pub bin_size: usize,
    pub collect: CollectConfig,
    pub reject: RejectConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            rounds: 3,
            bin_size: DEFAULT_BIN_SIZE,
            collect: CollectConfig::default(),
            reject: RejectConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundSummary {
    pub round: usize,
    pub pool_size: usize,
    pub attempted: usize,
    pub valid: usize,
    pub kept: usize,
    pub solved: usize,
    pub skipped: usize,
    /// Tasks with at least one valid trajectory, summed over rounds so far.
    pub covered_total: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    pub summary: RoundSummary,
    pub kept: Vec<StoreEntry>,
    pub profiles: Vec<SuccessProfile>,
    pub solved: BTreeSet<String>,
    pub next_pool: TaskPool,
}

const COMPLETE: &str = "COMPLETE";

/// Directory of per-round files; a round with a completion marker is final.
#[derive(Debug, Clone)]
pub struct Journal {
    root: PathBuf,
}

impl Journal {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn round_dir(&self, round: usize) -> PathBuf {
        self.root.join(format!("round_{round}"))
    }

    pub fn is_complete(&self, round: usize) -> bool {
        self.round_dir(round).join(COMPLETE).is_file()
    }

    pub fn store_path(&self) -> PathBuf {
        self.root.join("store.jsonl")
    }

    fn fail(path: &Path, e: impl std::fmt::Display) -> PipelineError {
        PipelineError::Journal {
            path: path.display().to_string(),
            reason: e.to_string(),
        }
    }

    fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Self::fail(dir, e))?;
        }
        let text = serde_json::to_string_pretty(value).map_err(|e| Self::fail(path, e))?;
        fs::write(path, text).map_err(|e| Self::fail(path, e))
    }

    fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, PipelineError> {
        let text = fs::read_to_string(path).map_err(|e| Self::fail(path, e))?;
        serde_json::from_str(&text).map_err(|e| Self::fail(path, e))
    }
}

/// Gold references and hardness for every task that has a usable gold.
pub fn prepare_golds(
    tasks: &[DialogueTask],
    registry: &DatabaseRegistry,
    config: &CollectConfig,
) -> (HashMap<String, GoldReference>, HashMap<String, Hardness>) {
    let mut golds = HashMap::new();
    let mut hardness = HashMap::new();
    for t in tasks {
        match GoldReference::compute(t, registry, config.episode.exec) {
            Ok(g) => {
                hardness.insert(
                    t.id(),
                    g.clauses
                        .as_ref()
                        .map_or(Hardness::Extra, classify_hardness),
                );
                golds.insert(t.id(), g);
            }
            Err(e) => log::warn!("no gold for {}: {e}", t.id()),
        }
    }
    (golds, hardness)
}

/// One pass of collect, validate, select and shrink. A round already marked
/// complete in the journal is read back instead of rerun.
#[allow(clippy::too_many_arguments)]
pub fn run_round<P: Policy + ?Sized>(
    journal: &Journal,
    pool: &TaskPool,
    policy: &P,
    registry: &DatabaseRegistry,
    golds: &HashMap<String, GoldReference>,
    hardness: &HashMap<String, Hardness>,
    weights: &RewardWeights,
    config: &PipelineConfig,
    covered_before: usize,
) -> Result<RoundOutcome, PipelineError> {
    let dir = journal.round_dir(pool.round);
    if journal.is_complete(pool.round) {
        let summary: RoundSummary = Journal::read_json(&dir.join("summary.json"))?;
        let kept: Vec<StoreEntry> = read_jsonl(&dir.join("kept.jsonl"))?;
        let profiles: Vec<SuccessProfile> = read_jsonl(&dir.join("profiles.jsonl"))?;
        let solved: BTreeSet<String> = Journal::read_json(&dir.join("solved.json"))?;
        let next_pool = update_pool(pool, &solved);
        return Ok(RoundOutcome {
            summary,
            kept,
            profiles,
            solved,
            next_pool,
        });
    }
    fs::create_dir_all(&dir).map_err(|e| Journal::fail(&dir, e))?;
    Journal::write_json(&dir.join("pool.json"), pool)?;

    let collected = collect_rollouts(pool, policy, registry, &config.collect);
    write_jsonl(&dir.join("raw.jsonl"), &collected.trajectories)?;
    Journal::write_json(&dir.join("skipped.json"), &collected.skipped)?;

    let scored = score_all(&collected.trajectories, golds, weights, pool.round);
    let valid = filter_valid(&scored);
    write_jsonl(&dir.join("valid.jsonl"), &valid)?;
    let profiles = success_profiles(&scored);
    write_jsonl(&dir.join("profiles.jsonl"), &profiles)?;

    let mut kept = Vec::new();
    let mut solved = BTreeSet::new();
    for p in &profiles {
        let mine: Vec<ScoredTrajectory> = valid
            .iter()
            .filter(|s| s.task_id == p.task_id)
            .cloned()
            .collect();
        if mine.is_empty() {
            continue;
        }
        solved.insert(p.task_id.clone());
        let h = hardness.get(&p.task_id).copied().unwrap_or(Hardness::Extra);
        for s in reject_sample(&mine, h, p, &config.reject.embedder, &config.reject) {
            kept.push(StoreEntry {
                task_id: s.task_id,
                round: pool.round,
                hardness: h,
                trajectory: s.trajectory,
                reward: s.reward,
            });
        }
    }
    write_jsonl(&dir.join("kept.jsonl"), &kept)?;
    Journal::write_json(&dir.join("solved.json"), &solved)?;

    let summary = RoundSummary {
        round: pool.round,
        pool_size: pool.len(),
        attempted: collected.trajectories.len(),
        valid: valid.len(),
        kept: kept.len(),
        solved: solved.len(),
        skipped: collected.skipped.len(),
        covered_total: covered_before + solved.len(),
    };
    Journal::write_json(&dir.join("summary.json"), &summary)?;
    fs::write(dir.join(COMPLETE), b"").map_err(|e| Journal::fail(&dir, e))?;
    let next_pool = update_pool(pool, &solved);
    Ok(RoundOutcome {
        summary,
        kept,
        profiles,
        solved,
        next_pool,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollectionReport {
    pub rounds: Vec<RoundSummary>,
    pub store: Vec<StoreEntry>,
    /// Success profiles of the first round, which covers every task.
    pub profiles: Vec<SuccessProfile>,
}

/// Runs collection rounds until the pool empties or `config.rounds` is hit,
/// writing the cumulative store after each round.
pub fn run_collection<P: Policy + ?Sized>(
    tasks: Vec<DialogueTask>,
    policy: &P,
    registry: &DatabaseRegistry,
    weights: &RewardWeights,
    config: &PipelineConfig,
    journal: &Journal,
) -> Result<CollectionReport, PipelineError> {
    let (golds, hardness) = prepare_golds(&tasks, registry, &config.collect);
    let mut pool = TaskPool::new(tasks)?;
    let mut report = CollectionReport {
        rounds: Vec::new(),
        store: Vec::new(),
        profiles: Vec::new(),
    };
    let mut covered = 0;
    for _ in 0..config.rounds {
        if pool.is_empty() {
            break;
        }
        let out = run_round(
            journal, &pool, policy, registry, &golds, &hardness, weights, config, covered,
        )?;
        covered = out.summary.covered_total;
        if report.rounds.is_empty() {
            report.profiles = out.profiles.clone();
        }
        report.store.extend(out.kept);
        report.rounds.push(out.summary);
        write_jsonl(&journal.store_path(), &report.store)?;
        pool = out.next_pool;
    }
    Ok(report)
}

/// Re-scores stored trajectories; returns ids that no longer validate.
pub fn revalidate(
    store: &[StoreEntry],
    golds: &HashMap<String, GoldReference>,
    weights: &RewardWeights,
) -> Vec<String> {
    let raw: Vec<Trajectory> = store.iter().map(|e| e.trajectory.clone()).collect();
    let scored = score_all(&raw, golds, weights, 0);
    let ok: BTreeSet<&str> = scored
        .iter()
        .filter(|s| s.is_valid())
        .map(|s| s.trajectory.id.as_str())
        .collect();
    store
        .iter()
        .filter(|e| !ok.contains(e.trajectory.id.as_str()))
        .map(|e| e.trajectory.id.clone())
        .collect()
}
