use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::clauses::{Condition, JoinUnit, OrderUnit, SqlClauses};
use super::normalize::NormalizedSql;

/// How JOIN units are compared.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JoinMode {
    #[default]
    TablesAndConditions,
    TablesOnly,
}

pub fn exact_match(pred: &NormalizedSql, gold: &NormalizedSql) -> bool {
    pred.text() == gold.text()
}

/// F1 between two unit sets: 1 when both are empty, 0 when exactly one is.
pub fn set_f1<T: Ord>(pred: &BTreeSet<T>, gold: &BTreeSet<T>) -> f64 {
    match (pred.is_empty(), gold.is_empty()) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.0,
        _ => {
            let common = pred.intersection(gold).count();
            2.0 * common as f64 / (pred.len() + gold.len()) as f64
        }
    }
}

#[derive(PartialEq, Eq, PartialOrd, Ord)]
enum GroupUnit<'a> {
    Column(&'a str),
    Having(&'a Condition),
}

#[derive(PartialEq, Eq, PartialOrd, Ord)]
enum OrderKey<'a> {
    Key(&'a OrderUnit),
    Limit(u64),
}

fn group_units(c: &SqlClauses) -> BTreeSet<GroupUnit<'_>> {
    c.group
        .iter()
        .map(|g| GroupUnit::Column(g))
        .chain(c.having.iter().map(GroupUnit::Having))
        .collect()
}

fn order_units(c: &SqlClauses) -> BTreeSet<OrderKey<'_>> {
    c.order
        .iter()
        .map(OrderKey::Key)
        .chain(c.limit.map(OrderKey::Limit))
        .collect()
}

fn join_units(c: &SqlClauses, mode: JoinMode) -> BTreeSet<&JoinUnit> {
    c.join
        .iter()
        .filter(|u| mode == JoinMode::TablesAndConditions || !matches!(u, JoinUnit::On(_)))
        .collect()
}

/// Per-clause F1 in SELECT, WHERE, JOIN, GROUP, ORDER order.
pub fn per_clause_f1(pred: &SqlClauses, gold: &SqlClauses, mode: JoinMode) -> [f64; 5] {
    [
        set_f1(&pred.select, &gold.select),
        set_f1(&pred.where_, &gold.where_),
        set_f1(&join_units(pred, mode), &join_units(gold, mode)),
        set_f1(&group_units(pred), &group_units(gold)),
        set_f1(&order_units(pred), &order_units(gold)),
    ]
}

pub fn clause_f1_with(pred: &SqlClauses, gold: &SqlClauses, mode: JoinMode) -> f64 {
    per_clause_f1(pred, gold, mode).iter().sum::<f64>() / 5.0
}

pub fn clause_f1(pred: &SqlClauses, gold: &SqlClauses) -> f64 {
    clause_f1_with(pred, gold, JoinMode::default())
}
