use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::select::SuccessProfile;
use crate::task::{write_jsonl, DialogueTask, JsonlError};

pub const DEFAULT_BIN_SIZE: usize = 2000;

/// Drops always-solved tasks, sorts the rest by successes (most first, then
/// task id) and cuts contiguous bins. Bin 0 is the easiest.
pub fn curriculum_bins(profiles: &[SuccessProfile], bin_size: usize) -> Vec<Vec<SuccessProfile>> {
    let mut kept: Vec<SuccessProfile> = profiles
        .iter()
        .filter(|p| !p.solved_every_time())
        .cloned()
        .collect();
    kept.sort_by(|a, b| {
        b.successes
            .cmp(&a.successes)
            .then_with(|| a.task_id.cmp(&b.task_id))
    });
    kept.chunks(bin_size.max(1))
        .map(<[SuccessProfile]>::to_vec)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurriculumRecord {
    #[serde(flatten)]
    pub task: DialogueTask,
    pub successes: u32,
}

/// Writes `train_rl{k}.jsonl` for k = 1.. into `dir`.
pub fn write_curriculum(
    dir: &Path,
    bins: &[Vec<SuccessProfile>],
    tasks: &BTreeMap<String, DialogueTask>,
) -> Result<Vec<PathBuf>, JsonlError> {
    let mut paths = Vec::new();
    for (k, bin) in bins.iter().enumerate() {
        let records: Vec<CurriculumRecord> = bin
            .iter()
            .filter_map(|p| {
                tasks.get(&p.task_id).map(|t| CurriculumRecord {
                    task: t.clone(),
                    successes: p.successes,
                })
            })
            .collect();
        let path = dir.join(format!("train_rl{}.jsonl", k + 1));
        write_jsonl(&path, &records)?;
        paths.push(path);
    }
    Ok(paths)
}
