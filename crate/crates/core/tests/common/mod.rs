#![allow(dead_code)]

use convsql::db::DatabaseRegistry;
use convsql::episode::{ActionKind, Verdict};
use convsql::fixtures::materialize;
use rand::seq::SliceRandom;
use rand::Rng;

pub fn registry() -> (tempfile::TempDir, DatabaseRegistry) {
    let dir = tempfile::tempdir().unwrap();
    let reg = materialize(dir.path()).unwrap();
    (dir, reg)
}

/// A query built from labelled parts, with the units each clause should
/// decompose into: select, where, join, group, order.
#[derive(Debug, Clone)]
pub struct Generated {
    pub sql: String,
    pub units: [Vec<String>; 5],
}

const SELECT: &[&str] = &["c0", "c1", "c2", "count(*)", "max(c3)"];
const WHERE: &[&str] = &["c0 = 1", "c1 > 2", "c2 like '%a%'", "c4 != 3", "c5 <= 7"];
const JOINS: &[(&str, &[&str])] = &[
    ("t2", &["t1.k = t2.k", "t1.m = t2.m"]),
    ("t3", &["t1.j = t3.j"]),
];
const GROUP: &[&str] = &["c0", "c1"];
const HAVING: &[&str] = &["count(*) > 1", "sum(c3) < 10"];
const ORDER: &[&str] = &["c0", "c2", "c5"];

fn subset<'a, R: Rng>(rng: &mut R, items: &[&'a str], min: usize) -> Vec<&'a str> {
    loop {
        let mut v: Vec<&str> = items
            .iter()
            .copied()
            .filter(|_| rng.gen_bool(0.5))
            .collect();
        if v.len() >= min {
            v.shuffle(rng);
            return v;
        }
    }
}

pub fn generate<R: Rng>(rng: &mut R) -> Generated {
    let select = subset(rng, SELECT, 1);
    let mut sql = format!("SELECT {} FROM t1", select.join(", "));
    let mut join = vec!["t1".to_string()];
    for (table, conds) in JOINS {
        if rng.gen_bool(0.4) {
            let cond = conds[rng.gen_range(0..conds.len())];
            sql.push_str(&format!(" JOIN {table} ON {cond}"));
            join.push(table.to_string());
            join.push(format!("on {cond}"));
        }
    }
    let wh = subset(rng, WHERE, 0);
    if !wh.is_empty() {
        sql.push_str(&format!(" WHERE {}", wh.join(" AND ")));
    }
    let group = subset(rng, GROUP, 0);
    let mut group_units: Vec<String> = group.iter().map(|g| g.to_string()).collect();
    if !group.is_empty() {
        sql.push_str(&format!(" GROUP BY {}", group.join(", ")));
        let having = subset(rng, HAVING, 0);
        if !having.is_empty() {
            sql.push_str(&format!(" HAVING {}", having.join(" AND ")));
            group_units.extend(having.iter().map(|h| format!("having {h}")));
        }
    }
    let mut order_units = Vec::new();
    let order = subset(rng, ORDER, 0);
    if !order.is_empty() {
        let keys: Vec<String> = order
            .iter()
            .map(|c| format!("{c} {}", if rng.gen_bool(0.5) { "asc" } else { "desc" }))
            .collect();
        sql.push_str(&format!(" ORDER BY {}", keys.join(", ")));
        order_units.extend(keys);
    }
    if rng.gen_bool(0.3) {
        let n = [1, 5][rng.gen_range(0..2)];
        sql.push_str(&format!(" LIMIT {n}"));
        order_units.push(format!("limit {n}"));
    }
    let owned = |v: Vec<&str>| v.into_iter().map(String::from).collect::<Vec<_>>();
    Generated {
        sql,
        units: [owned(select), owned(wh), join, group_units, order_units],
    }
}

/// Set F1 by counting shared labels pairwise.
pub fn brute_f1(pred: &[String], gold: &[String]) -> f64 {
    if pred.is_empty() && gold.is_empty() {
        return 1.0;
    }
    if pred.is_empty() || gold.is_empty() {
        return 0.0;
    }
    let mut shared = 0usize;
    for p in pred {
        for g in gold {
            if p == g {
                shared += 1;
            }
        }
    }
    let precision = shared as f64 / pred.len() as f64;
    let recall = shared as f64 / gold.len() as f64;
    if shared == 0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

pub fn oracle_clause_f1(pred: &Generated, gold: &Generated) -> f64 {
    (0..5)
        .map(|i| brute_f1(&pred.units[i], &gold.units[i]))
        .sum::<f64>()
        / 5.0
}

pub type Step = (ActionKind, Option<Verdict>);

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum State {
    Empty,
    Drafted,
    Executed,
    ExecPassed,
    Failed,
    Confirmed,
    Final,
    Pending,
}

fn advance(state: State, step: Step) -> Option<State> {
    use ActionKind::*;
    use State::*;
    Some(match (state, step) {
        (Empty, (Propose, None)) | (Failed, (SelfCorrect, None)) => Drafted,
        (Drafted, (Execute, None)) => Executed,
        (Executed, (EVerify, Some(Verdict::Pass))) => ExecPassed,
        (Executed, (EVerify, Some(Verdict::Fail))) => Failed,
        (ExecPassed, (MVerify, Some(Verdict::Pass))) => Confirmed,
        (ExecPassed, (MVerify, Some(Verdict::Fail))) => Failed,
        (ExecPassed, (MVerify, None)) => Pending,
        (Confirmed, (Finalize, None)) => Final,
        _ => return None,
    })
}

/// Independent acceptor: the transition table above, an unanswered memory
/// check only at the very end, and at most `max_calls` tool calls.
pub fn oracle_accepts(seq: &[Step], max_calls: usize) -> bool {
    let mut state = State::Empty;
    for &step in seq {
        if state == State::Pending {
            return false;
        }
        match advance(state, step) {
            Some(next) => state = next,
            None => return false,
        }
    }
    let calls = seq
        .iter()
        .filter(|(k, _)| matches!(k, ActionKind::Execute | ActionKind::MVerify))
        .count();
    calls <= max_calls
}

fn any_step<R: Rng>(rng: &mut R) -> Step {
    let kind = ActionKind::ALL[rng.gen_range(0..6)];
    let verdict = [None, Some(Verdict::Pass), Some(Verdict::Fail)][rng.gen_range(0..3)];
    (kind, verdict)
}

/// Mostly-legal random sequences with occasional arbitrary steps.
pub fn random_sequence<R: Rng>(rng: &mut R, legal_bias: f64) -> Vec<Step> {
    let len = rng.gen_range(0..=14);
    let mut out = Vec::with_capacity(len);
    let mut state = Some(State::Empty);
    for _ in 0..len {
        let step = match state {
            Some(s) if rng.gen_bool(legal_bias) => {
                let options: Vec<Step> = (0..6)
                    .flat_map(|k| {
                        [None, Some(Verdict::Pass), Some(Verdict::Fail)]
                            .map(|v| (ActionKind::ALL[k], v))
                    })
                    .filter(|&st| advance(s, st).is_some())
                    .collect();
                if options.is_empty() {
                    any_step(rng)
                } else {
                    options[rng.gen_range(0..options.len())]
                }
            }
            _ => any_step(rng),
        };
        state = state.and_then(|s| advance(s, step));
        out.push(step);
    }
    out
}

pub fn tool_call(name: &str, code: &str) -> String {
    format!(
        "<tool_call>{}</tool_call>",
        serde_json::json!({"name": name, "arguments": {"code": code}})
    )
}
