use serde::{Deserialize, Serialize};

use crate::episode::Trajectory;
use crate::grpo::build_loss_mask;
use crate::reward::RewardBreakdown;
use crate::sql::Hardness;

/// One accepted trajectory in the cumulative store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoreEntry {
    pub task_id: String,
    pub round: usize,
    pub hardness: Hardness,
    pub trajectory: Trajectory,
    pub reward: RewardBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SftMetadata {
    pub round: usize,
    pub hardness: Hardness,
    pub interactions: usize,
}

/// Supervised record: full text with the spans a trainer should learn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SftRecord {
    pub trajectory_id: String,
    pub task_id: String,
    pub prompt: String,
    pub text: String,
    pub mask_spans: Vec<(usize, usize)>,
    pub metadata: SftMetadata,
    pub trajectory: Trajectory,
    pub reward: RewardBreakdown,
}

pub fn export_sft(store: &[StoreEntry]) -> Vec<SftRecord> {
    store
        .iter()
        .map(|e| SftRecord {
            trajectory_id: e.trajectory.id.clone(),
            task_id: e.task_id.clone(),
            prompt: e
                .trajectory
                .segments
                .first()
                .map(|s| s.text.clone())
                .unwrap_or_default(),
            text: e.trajectory.text(),
            mask_spans: build_loss_mask(&e.trajectory).spans,
            metadata: SftMetadata {
                round: e.round,
                hardness: e.hardness,
                interactions: e.trajectory.interactions,
            },
            trajectory: e.trajectory.clone(),
            reward: e.reward.clone(),
        })
        .collect()
}

pub fn import_sft(records: &[SftRecord]) -> Vec<StoreEntry> {
    records
        .iter()
        .map(|r| StoreEntry {
            task_id: r.task_id.clone(),
            round: r.metadata.round,
            hardness: r.metadata.hardness,
            trajectory: r.trajectory.clone(),
            reward: r.reward.clone(),
        })
        .collect()
}
