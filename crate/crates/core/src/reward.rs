//! Outcome and process rewards for finished trajectories.

use serde::{Deserialize, Serialize};

use crate::db::{
    execution_match, DatabaseRegistry, DbError, ExecClass, ExecLimits, ExecutionOutcome,
};
use crate::episode::{ActionKind, Trajectory, Verdict};
use crate::sql::{
    clause_f1, decompose_clauses, exact_match, normalize_sql, NormalizedSql, Schema, SqlClauses,
};
use crate::task::DialogueTask;

/// How repeated process rewards of one family are combined.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregate {
    #[default]
    Mean,
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardWeights {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    pub w4: f64,
    pub aggregate: Aggregate,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            w1: 1.0,
            w2: 0.5,
            w3: 0.3,
            w4: 0.2,
            aggregate: Aggregate::Mean,
        }
    }
}

impl RewardWeights {
    pub fn new(w1: f64, w2: f64, w3: f64, w4: f64) -> Self {
        Self {
            w1,
            w2,
            w3,
            w4,
            aggregate: Aggregate::Mean,
        }
    }

    pub fn is_valid(&self) -> bool {
        [self.w1, self.w2, self.w3, self.w4]
            .iter()
            .all(|w| w.is_finite() && *w >= 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_ex: f64,
    pub r_em: f64,
    pub propose_correct: Vec<f64>,
    pub e_verify: Vec<f64>,
    pub m_verify: Vec<f64>,
    pub total: f64,
}

impl RewardBreakdown {
    /// Builds a breakdown whose total follows from the components.
    pub fn assemble(
        r_ex: f64,
        r_em: f64,
        propose_correct: Vec<f64>,
        e_verify: Vec<f64>,
        m_verify: Vec<f64>,
        w: &RewardWeights,
    ) -> Self {
        let agg = |xs: &[f64]| match w.aggregate {
            Aggregate::Mean if xs.is_empty() => 0.0,
            Aggregate::Mean => xs.iter().sum::<f64>() / xs.len() as f64,
            Aggregate::Sum => xs.iter().sum(),
        };
        let total = w.w1 * r_ex
            + w.w2 * r_em
            + w.w3 * agg(&propose_correct)
            + w.w4 * (agg(&e_verify) + agg(&m_verify));
        Self {
            r_ex,
            r_em,
            propose_correct,
            e_verify,
            m_verify,
            total,
        }
    }
}

/// Everything about the reference answer a score needs.
#[derive(Debug, Clone, PartialEq)]
pub struct GoldReference {
    pub sql: NormalizedSql,
    pub clauses: Option<SqlClauses>,
    pub outcome: ExecutionOutcome,
    /// The gold result order is significant.
    pub ordered: bool,
    pub schema: Option<Schema>,
}

impl GoldReference {
    pub fn new(sql: NormalizedSql, outcome: ExecutionOutcome, schema: Option<Schema>) -> Self {
        let clauses = decompose_clauses(&sql, schema.as_ref()).ok();
        let ordered = clauses.as_ref().is_some_and(|c| !c.order.is_empty());
        Self {
            sql,
            clauses,
            outcome,
            ordered,
            schema,
        }
    }

    /// Executes the task's gold SQL on its database.
    pub fn compute(
        task: &DialogueTask,
        registry: &DatabaseRegistry,
        limits: ExecLimits,
    ) -> Result<Self, DbError> {
        let db = registry.open(&task.db_id)?;
        let schema = registry.schema(&task.db_id)?.schema.clone();
        let sql = normalize_sql(&task.gold_sql).map_err(|e| DbError::CorruptFile {
            id: task.db_id.clone(),
            reason: format!("gold SQL of {}: {e}", task.id()),
        })?;
        let outcome = db.execute(sql.original(), limits);
        Ok(Self::new(sql, outcome, Some(schema)))
    }

    fn f1(&self, sql: &NormalizedSql) -> f64 {
        match (&self.clauses, decompose_clauses(sql, self.schema.as_ref())) {
            (Some(g), Ok(p)) => clause_f1(&p, g),
            _ => 0.0,
        }
    }
}

pub fn reward_ex(pred: &ExecutionOutcome, gold: &ExecutionOutcome, gold_ordered: bool) -> f64 {
    if execution_match(pred, gold, gold_ordered) {
        1.0
    } else {
        0.0
    }
}

pub fn reward_em(pred: &NormalizedSql, gold: &NormalizedSql) -> f64 {
    if exact_match(pred, gold) {
        1.0
    } else {
        0.0
    }
}

/// Clause F1 against gold; an unparseable prediction scores 0.
pub fn reward_propose_or_correct(sql: &NormalizedSql, gold: &NormalizedSql) -> f64 {
    match (decompose_clauses(sql, None), decompose_clauses(gold, None)) {
        (Ok(p), Ok(g)) => clause_f1(&p, &g),
        _ => 0.0,
    }
}

pub fn reward_e_verify(class: ExecClass, verdict: Verdict) -> f64 {
    match (class, verdict) {
        (ExecClass::Ok, Verdict::Pass) => 1.0,
        (ExecClass::Ok, Verdict::Fail) => 0.0,
        (ExecClass::Null, Verdict::Pass) => 0.0,
        (ExecClass::Null, Verdict::Fail) => 0.1,
        (ExecClass::Error, Verdict::Pass) => 0.0,
        (ExecClass::Error, Verdict::Fail) => 1.0,
    }
}

fn m_verify_from_f1(verdict: Verdict, f: f64) -> f64 {
    match verdict {
        Verdict::Pass => f,
        Verdict::Fail => 1.0 - f,
    }
}

pub fn reward_m_verify(verdict: Verdict, candidate: &NormalizedSql, gold: &NormalizedSql) -> f64 {
    m_verify_from_f1(verdict, reward_propose_or_correct(candidate, gold))
}

/// Scores a finished trajectory. Missing pieces score 0 rather than error.
pub fn score_trajectory(
    traj: &Trajectory,
    gold: &GoldReference,
    weights: &RewardWeights,
) -> RewardBreakdown {
    let (r_ex, r_em) = match (&traj.final_sql, &traj.final_outcome) {
        (Some(sql), Some(out)) => (
            reward_ex(out, &gold.outcome, gold.ordered),
            reward_em(sql, &gold.sql),
        ),
        (Some(sql), None) => (0.0, reward_em(sql, &gold.sql)),
        _ => (0.0, 0.0),
    };
    let mut propose = Vec::new();
    let mut e_verify = Vec::new();
    let mut m_verify = Vec::new();
    let mut judged: Option<ExecClass> = None;
    for a in &traj.actions {
        match a.kind {
            ActionKind::Propose | ActionKind::SelfCorrect => {
                propose.push(a.sql.as_ref().map_or(0.0, |s| gold.f1(s)));
            }
            ActionKind::Execute => judged = a.exec_class,
            ActionKind::EVerify => {
                if let Some(v) = a.verdict {
                    e_verify.push(judged.map_or(0.0, |c| reward_e_verify(c, v)));
                }
            }
            ActionKind::MVerify => {
                if let Some(v) = a.verdict {
                    m_verify.push(m_verify_from_f1(
                        v,
                        a.sql.as_ref().map_or(0.0, |s| gold.f1(s)),
                    ));
                }
            }
            ActionKind::Finalize => {}
        }
    }
    RewardBreakdown::assemble(r_ex, r_em, propose, e_verify, m_verify, weights)
}
