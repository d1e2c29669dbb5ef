use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::task::DialogueTask;

/// Tasks still lacking a valid trajectory, by round.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskPool {
    pub round: usize,
    tasks: BTreeMap<String, DialogueTask>,
}

impl TaskPool {
    pub fn new(tasks: Vec<DialogueTask>) -> Result<Self, PipelineError> {
        let mut map = BTreeMap::new();
        for t in tasks {
            let id = t.id();
            if map.insert(id.clone(), t).is_some() {
                return Err(PipelineError::DuplicateTaskId(id));
            }
        }
        Ok(Self {
            round: 0,
            tasks: map,
        })
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn ids(&self) -> BTreeSet<String> {
        self.tasks.keys().cloned().collect()
    }

    pub fn get(&self, id: &str) -> Option<&DialogueTask> {
        self.tasks.get(id)
    }

    pub fn tasks(&self) -> impl Iterator<Item = (&str, &DialogueTask)> {
        self.tasks.iter().map(|(k, v)| (k.as_str(), v))
    }
}

/// Next round's pool: every solved task removed.
pub fn update_pool(pool: &TaskPool, solved: &BTreeSet<String>) -> TaskPool {
    let tasks = pool
        .tasks
        .iter()
        .filter(|(id, _)| !solved.contains(*id))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    TaskPool {
        round: pool.round + 1,
        tasks,
    }
}
