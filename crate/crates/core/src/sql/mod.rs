//! SQL normalization, clause decomposition, clause-level F1 and hardness.

pub mod clauses;
pub mod f1;
pub mod hardness;
pub mod normalize;
pub mod parse;
pub mod token;

pub use clauses::{
    decompose_clauses, decompose_str, Condition, JoinUnit, Operand, OrderUnit, Predicate, Schema,
    SetOps, SqlClauses,
};
pub use f1::{clause_f1, clause_f1_with, exact_match, per_clause_f1, JoinMode};
pub use hardness::{classify_hardness, Hardness};
pub use normalize::{normalize_sql, NormalizedSql};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SqlError {
    #[error("empty query")]
    EmptyQuery,
    #[error("parse error at byte {offset}: expected {expected}, found {found:?}")]
    Parse {
        offset: usize,
        expected: String,
        found: String,
    },
}
