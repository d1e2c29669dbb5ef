use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use sha2::{Digest, Sha256};

use super::executor::DbHandle;
use super::outcome::Value;
use super::DbError;
use crate::sql::Schema;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Schema facts derived from one database file.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemaInfo {
    /// sha256 of the file the schema was read from.
    pub hash: String,
    pub schema: Schema,
    /// CREATE TABLE text plus one example row per table.
    pub prompt: String,
}

#[derive(Debug)]
pub struct DatabaseRegistry {
    root: PathBuf,
    entries: BTreeMap<String, PathBuf>,
    cache: Mutex<HashMap<String, Arc<SchemaInfo>>>,
}

impl DatabaseRegistry {
    /// Loads `root/manifest.json`, a JSON object of id to relative file path.
    pub fn load(root: impl AsRef<Path>) -> Result<Self, DbError> {
        let root = root.as_ref().to_path_buf();
        let manifest = root.join(MANIFEST_FILE);
        let text = fs::read_to_string(&manifest)
            .map_err(|e| DbError::Manifest(format!("{}: {e}", manifest.display())))?;
        let map: BTreeMap<String, String> = serde_json::from_str(&text)
            .map_err(|e| DbError::Manifest(format!("{}: {e}", manifest.display())))?;
        Self::from_entries(root, map)
    }

    pub fn from_entries<I, K, P>(root: impl AsRef<Path>, entries: I) -> Result<Self, DbError>
    where
        I: IntoIterator<Item = (K, P)>,
        K: Into<String>,
        P: AsRef<Path>,
    {
        let root = root.as_ref().to_path_buf();
        let mut map = BTreeMap::new();
        for (id, rel) in entries {
            let id = id.into();
            let path = root.join(rel);
            if !path.is_file() {
                return Err(DbError::CorruptFile {
                    id,
                    reason: format!("missing file {}", path.display()),
                });
            }
            map.insert(id, path);
        }
        Ok(Self {
            root,
            entries: map,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entries.contains_key(id)
    }

    pub fn path(&self, id: &str) -> Result<&Path, DbError> {
        self.entries
            .get(id)
            .map(PathBuf::as_path)
            .ok_or_else(|| DbError::UnknownDatabase(id.to_string()))
    }

    pub fn open(&self, id: &str) -> Result<DbHandle, DbError> {
        DbHandle::open(id, self.path(id)?)
    }

    /// Schema of `id`, re-read whenever the file content hash changes.
    pub fn schema(&self, id: &str) -> Result<Arc<SchemaInfo>, DbError> {
        let path = self.path(id)?;
        let hash = file_hash(path).map_err(|e| DbError::CorruptFile {
            id: id.to_string(),
            reason: e.to_string(),
        })?;
        if let Some(hit) = self.cache.lock().expect("schema cache poisoned").get(id) {
            if hit.hash == hash {
                return Ok(Arc::clone(hit));
            }
        }
        let handle = self.open(id)?;
        let (schema, prompt) = read_schema(&handle).map_err(|e| DbError::CorruptFile {
            id: id.to_string(),
            reason: e.to_string(),
        })?;
        let info = Arc::new(SchemaInfo {
            hash,
            schema,
            prompt,
        });
        self.cache
            .lock()
            .expect("schema cache poisoned")
            .insert(id.to_string(), Arc::clone(&info));
        Ok(info)
    }
}

pub fn file_hash(path: &Path) -> std::io::Result<String> {
    let bytes = fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn read_schema(handle: &DbHandle) -> rusqlite::Result<(Schema, String)> {
    let conn = handle.connection();
    let mut stmt = conn.prepare(
        "SELECT name, sql FROM sqlite_master WHERE type = 'table' AND name NOT LIKE 'sqlite_%' ORDER BY rowid",
    )?;
    let tables: Vec<(String, String)> = stmt
        .query_map([], |r| {
            Ok((
                r.get(0)?,
                r.get::<_, Option<String>>(1)?.unwrap_or_default(),
            ))
        })?
        .collect::<Result<_, _>>()?;

    let mut schema = Schema::new();
    let mut blocks = Vec::new();
    for (name, ddl) in tables {
        let quoted = format!("\"{}\"", name.replace('"', "\"\""));
        let mut info = conn.prepare(&format!("PRAGMA table_info({quoted})"))?;
        let columns: Vec<String> = info
            .query_map([], |r| r.get(1))?
            .collect::<Result<_, _>>()?;
        schema.add_table(&name, &columns);

        let mut sample = conn.prepare(&format!("SELECT * FROM {quoted} LIMIT 1"))?;
        let width = sample.column_count();
        let example: Option<Vec<Value>> = sample
            .query_map([], |r| {
                (0..width).map(|i| r.get_ref(i).map(Value::from)).collect()
            })?
            .next()
            .transpose()?;

        let ddl = match ddl.strip_prefix("CREATE TABLE") {
            Some(rest) => format!("create table{rest}"),
            None => ddl,
        };
        let mut block = format!("{ddl}\n/*\n");
        match example {
            Some(row) => {
                block.push_str(&format!(
                    "1 example rows from table {name}:\n{}\n",
                    columns.join("\t")
                ));
                let cells: Vec<String> = row.iter().map(Value::display).collect();
                block.push_str(&cells.join("\t"));
                block.push('\n');
            }
            None => block.push_str(&format!(
                "0 example rows from table {name}:\n{}\n",
                columns.join("\t")
            )),
        }
        block.push_str("*/");
        blocks.push(block);
    }
    Ok((schema, blocks.join("\n")))
}
