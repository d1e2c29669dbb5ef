//! Read-only execution against registered single-file databases.

pub mod executor;
pub mod outcome;
pub mod registry;

pub use executor::{DbHandle, ExecLimits};
pub use outcome::{
    classify_outcome, execution_match, render_result_snippet, ExecClass, ExecutionOutcome, Value,
    RESULT_PREFIX,
};
pub use registry::{file_hash, DatabaseRegistry, SchemaInfo, MANIFEST_FILE};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DbError {
    #[error("unknown database {0:?}")]
    UnknownDatabase(String),
    #[error("database {id:?} is unreadable: {reason}")]
    CorruptFile { id: String, reason: String },
    #[error("bad registry manifest: {0}")]
    Manifest(String),
}
