use std::path::Path;
use std::time::{Duration, Instant};

use rusqlite::{Connection, OpenFlags};
use serde::{Deserialize, Serialize};

use super::outcome::{ExecutionOutcome, Value};
use super::DbError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExecLimits {
    pub timeout_ms: u64,
    pub max_rows: usize,
}

impl Default for ExecLimits {
    fn default() -> Self {
        Self {
            timeout_ms: 30_000,
            max_rows: 10_000,
        }
    }
}

/// Read-only connection to one registered database.
pub struct DbHandle {
    id: String,
    conn: Connection,
}

impl std::fmt::Debug for DbHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DbHandle").field("id", &self.id).finish()
    }
}

impl DbHandle {
    pub(crate) fn open(id: &str, path: &Path) -> Result<Self, DbError> {
        let corrupt = |e: rusqlite::Error| DbError::CorruptFile {
            id: id.to_string(),
            reason: e.to_string(),
        };
        let flags = OpenFlags::SQLITE_OPEN_READ_ONLY | OpenFlags::SQLITE_OPEN_NO_MUTEX;
        let conn = Connection::open_with_flags(path, flags).map_err(corrupt)?;
        conn.query_row("SELECT count(*) FROM sqlite_master", [], |r| {
            r.get::<_, i64>(0)
        })
        .map_err(corrupt)?;
        conn.pragma_update(None, "query_only", true)
            .map_err(corrupt)?;
        Ok(Self {
            id: id.to_string(),
            conn,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub(crate) fn connection(&self) -> &Connection {
        &self.conn
    }

    /// Runs one read-only statement. Failures become `status=error`.
    pub fn execute(&self, sql: &str, limits: ExecLimits) -> ExecutionOutcome {
        let start = Instant::now();
        let deadline = start + Duration::from_millis(limits.timeout_ms);
        self.conn
            .progress_handler(1_000, Some(move || Instant::now() >= deadline));
        let result = self.run(sql, limits.max_rows);
        self.conn.progress_handler(0, None::<fn() -> bool>);
        let elapsed = start.elapsed().as_millis() as u64;
        match result {
            Ok((rows, truncated)) => ExecutionOutcome::from_rows(rows, truncated, elapsed),
            Err(rusqlite::Error::SqliteFailure(e, _))
                if e.code == rusqlite::ErrorCode::OperationInterrupted =>
            {
                ExecutionOutcome::error(
                    format!("query exceeded the {} ms time limit", limits.timeout_ms),
                    elapsed,
                )
            }
            Err(e) => ExecutionOutcome::error(e.to_string(), elapsed),
        }
    }

    fn run(&self, sql: &str, max_rows: usize) -> rusqlite::Result<(Vec<Vec<Value>>, bool)> {
        let mut stmt = self.conn.prepare(sql)?;
        if !stmt.readonly() {
            return Err(rusqlite::Error::SqliteFailure(
                rusqlite::ffi::Error::new(rusqlite::ffi::SQLITE_READONLY),
                Some("write statements are not allowed".into()),
            ));
        }
        let width = stmt.column_count();
        let mut rows = stmt.query([])?;
        let mut out = Vec::new();
        while let Some(row) = rows.next()? {
            if out.len() == max_rows {
                return Ok((out, true));
            }
            let mut vals = Vec::with_capacity(width);
            for i in 0..width {
                vals.push(Value::from(row.get_ref(i)?));
            }
            out.push(vals);
        }
        Ok((out, false))
    }
}
