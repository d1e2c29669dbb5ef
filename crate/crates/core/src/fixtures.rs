//! Bundled sample databases (`car_1`, `world_1`) and two recorded dialogues
//! that replay against them.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rusqlite::Connection;

use serde::{Deserialize, Serialize};

use crate::db::{DatabaseRegistry, DbError, MANIFEST_FILE};
use crate::episode::{Episode, EpisodeConfig, EpisodeError};
use crate::policy::{conversation_key, FixtureEntry};
use crate::task::DialogueTask;

pub const DATABASES: &[(&str, &str)] = &[
    ("car_1", include_str!("../fixtures/databases/car_1.sql")),
    ("world_1", include_str!("../fixtures/databases/world_1.sql")),
];

/// A dialogue turn with the recorded model emissions for it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordedCase {
    pub task: DialogueTask,
    pub continuations: Vec<String>,
}

const CASE_SOURCES: &[&str] = &[
    include_str!("../fixtures/cases/case1.json"),
    include_str!("../fixtures/cases/case2.json"),
];

/// Case 1 fixes a case mismatch in a filter value after executing; case 2
/// adds a filter carried over from an earlier turn after checking memory.
pub fn recorded_cases() -> Vec<RecordedCase> {
    CASE_SOURCES
        .iter()
        .map(|s| serde_json::from_str(s).expect("bundled case parses"))
        .collect()
}

/// Scripted-policy entries for the recorded cases, keyed by the prompt each
/// task renders to under `config`.
pub fn case_pack(
    registry: &DatabaseRegistry,
    config: EpisodeConfig,
) -> Result<Vec<FixtureEntry>, EpisodeError> {
    recorded_cases()
        .into_iter()
        .map(|c| {
            let ep = Episode::new(&c.task, registry, config, 0)?;
            Ok(FixtureEntry {
                key: conversation_key(&ep.messages()),
                continuations: c.continuations,
            })
        })
        .collect()
}

/// Builds `<dir>/<id>/<id>.sqlite` for every bundled script plus a manifest,
/// replacing existing files.
pub fn materialize(dir: &Path) -> Result<DatabaseRegistry, DbError> {
    let io = |e: &dyn std::fmt::Display| DbError::Manifest(format!("{}: {e}", dir.display()));
    let mut manifest = BTreeMap::new();
    for (id, script) in DATABASES {
        let rel = format!("{id}/{id}.sqlite");
        let path = dir.join(&rel);
        fs::create_dir_all(path.parent().expect("nested path")).map_err(|e| io(&e))?;
        if path.exists() {
            fs::remove_file(&path).map_err(|e| io(&e))?;
        }
        let conn = Connection::open(&path).map_err(|e| io(&e))?;
        conn.execute_batch("PRAGMA foreign_keys = OFF;")
            .map_err(|e| io(&e))?;
        conn.execute_batch(script).map_err(|e| io(&e))?;
        conn.close().map_err(|(_, e)| io(&e))?;
        manifest.insert(id.to_string(), rel);
    }
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(dir.join(MANIFEST_FILE), text).map_err(|e| io(&e))?;
    DatabaseRegistry::load(dir)
}
