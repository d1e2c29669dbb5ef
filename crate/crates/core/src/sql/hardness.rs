//! Spider-style hardness grading by component counting.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::clauses::{Condition, JoinUnit, Operand, SqlClauses};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hardness {
    Easy,
    Medium,
    Hard,
    Extra,
}

impl Hardness {
    pub const ALL: [Hardness; 4] = [
        Hardness::Easy,
        Hardness::Medium,
        Hardness::Hard,
        Hardness::Extra,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Hardness::Easy => "easy",
            Hardness::Medium => "medium",
            Hardness::Hard => "hard",
            Hardness::Extra => "extra",
        }
    }
}

impl fmt::Display for Hardness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Hardness {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Hardness::ALL
            .into_iter()
            .find(|h| h.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown hardness {s:?}"))
    }
}

/// Component counts feeding the grade.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Components {
    pub component1: usize,
    pub component2: usize,
    pub others: usize,
}

pub fn classify_hardness(c: &SqlClauses) -> Hardness {
    grade(components(c))
}

pub fn grade(k: Components) -> Hardness {
    let Components {
        component1: c1,
        component2: c2,
        others,
    } = k;
    if c1 <= 1 && others == 0 && c2 == 0 {
        Hardness::Easy
    } else if (others <= 2 && c1 <= 1 && c2 == 0) || (c1 <= 2 && others < 2 && c2 == 0) {
        Hardness::Medium
    } else if (others > 2 && c1 <= 2 && c2 == 0)
        || (c1 > 2 && c1 <= 3 && others <= 2 && c2 == 0)
        || (c1 <= 1 && others == 0 && c2 <= 1)
    {
        Hardness::Hard
    } else {
        Hardness::Extra
    }
}

pub fn components(c: &SqlClauses) -> Components {
    let on: Vec<&Condition> = c
        .join
        .iter()
        .filter_map(|u| match u {
            JoinUnit::On(cond) => Some(cond),
            _ => None,
        })
        .collect();
    let all_conds = || {
        on.iter()
            .copied()
            .chain(c.where_.iter())
            .chain(c.having.iter())
    };

    let tables = c
        .join
        .iter()
        .filter(|u| !matches!(u, JoinUnit::On(_)))
        .count();
    let mut c1 = [
        !c.where_.is_empty(),
        !c.group.is_empty(),
        !c.order.is_empty(),
        c.limit.is_some(),
    ]
    .iter()
    .filter(|b| **b)
    .count();
    c1 += tables.saturating_sub(1);
    c1 += all_conds().map(or_count).sum::<usize>();
    c1 += all_conds().map(like_count).sum::<usize>();

    let c2 = all_conds().map(subquery_count).sum::<usize>() + c.set_ops.count();

    // Aggregates are counted the way the reference evaluator counts them:
    // WHERE contributes negated conditions, HAVING negations plus connectives.
    let where_leaves: usize = c.where_.iter().map(leaf_count).sum();
    let having_leaves: usize = c.having.iter().map(leaf_count).sum();
    let mut aggs = c.select.iter().filter(|s| is_aggregate(s)).count();
    aggs += c.where_.iter().map(negated_count).sum::<usize>();
    aggs += c.group.iter().filter(|s| is_aggregate(s)).count();
    aggs += c.order.iter().filter(|o| is_aggregate(&o.expr)).count();
    aggs += c.having.iter().map(negated_count).sum::<usize>() + having_leaves.saturating_sub(1);

    let others = [
        aggs > 1,
        c.select.len() > 1,
        where_leaves > 1,
        c.group.len() > 1,
    ]
    .iter()
    .filter(|b| **b)
    .count();
    Components {
        component1: c1,
        component2: c2,
        others,
    }
}

fn leaves(c: &Condition) -> Vec<(&Condition, bool)> {
    fn walk<'a>(c: &'a Condition, negated: bool, out: &mut Vec<(&'a Condition, bool)>) {
        match c {
            Condition::Any(xs) | Condition::All(xs) => {
                xs.iter().for_each(|x| walk(x, negated, out))
            }
            Condition::Not(x) => walk(x, !negated, out),
            leaf => out.push((leaf, negated)),
        }
    }
    let mut out = Vec::new();
    walk(c, false, &mut out);
    out
}

fn leaf_count(c: &Condition) -> usize {
    leaves(c).len()
}

fn or_count(c: &Condition) -> usize {
    match c {
        Condition::Any(xs) => xs.len() - 1 + xs.iter().map(or_count).sum::<usize>(),
        Condition::All(xs) => xs.iter().map(or_count).sum(),
        Condition::Not(x) => or_count(x),
        _ => 0,
    }
}

fn like_count(c: &Condition) -> usize {
    leaves(c)
        .into_iter()
        .filter(|(l, _)| matches!(l, Condition::Pred(p) if p.op == "like" || p.op == "not like"))
        .count()
}

fn negated_count(c: &Condition) -> usize {
    leaves(c)
        .into_iter()
        .filter(|(l, neg)| *neg || matches!(l, Condition::Pred(p) if p.op.starts_with("not ")))
        .count()
}

fn subquery_count(c: &Condition) -> usize {
    fn in_operand(o: &Operand) -> usize {
        match o {
            Operand::Subquery(_) => 1,
            Operand::List(xs) => xs.iter().map(in_operand).sum(),
            Operand::Range(a, b) => in_operand(a) + in_operand(b),
            _ => 0,
        }
    }
    leaves(c)
        .into_iter()
        .map(|(l, _)| match l {
            Condition::Pred(p) => in_operand(&p.rhs),
            Condition::Expr(e) => usize::from(e.contains("(SELECT ")),
            _ => 0,
        })
        .sum()
}

/// True when the whole unit is a single aggregate call.
fn is_aggregate(unit: &str) -> bool {
    let s = unit.strip_prefix("distinct ").unwrap_or(unit);
    let Some(open) = s.find('(') else {
        return false;
    };
    if !matches!(&s[..open], "count" | "sum" | "avg" | "min" | "max") {
        return false;
    }
    let mut depth = 0usize;
    let mut in_str = false;
    for (i, ch) in s.char_indices().skip(open) {
        match ch {
            '\'' => in_str = !in_str,
            '(' if !in_str => depth += 1,
            ')' if !in_str => {
                depth -= 1;
                if depth == 0 {
                    return i == s.len() - 1;
                }
            }
            _ => {}
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sql::decompose_str;

    fn level(q: &str) -> Hardness {
        classify_hardness(&decompose_str(q, None).unwrap())
    }

    #[test]
    fn ordering() {
        assert!(
            Hardness::Easy < Hardness::Medium
                && Hardness::Medium < Hardness::Hard
                && Hardness::Hard < Hardness::Extra
        );
        assert_eq!("Extra".parse::<Hardness>().unwrap(), Hardness::Extra);
    }

    #[test]
    fn grades_reference_examples() {
        assert_eq!(
            level("SELECT count(GovernmentForm) FROM country"),
            Hardness::Easy
        );
        assert_eq!(
            level("SELECT name FROM singer WHERE age > 20"),
            Hardness::Easy
        );
        assert_eq!(
            level("SELECT name, age FROM singer WHERE age > 20"),
            Hardness::Medium
        );
        assert_eq!(
            level("SELECT T1.Continent, count(*) FROM continents AS T1 JOIN countries AS T2 ON T1.ContId = T2.continent JOIN car_makers AS T3 ON T2.CountryId = T3.Country GROUP BY T1.Continent"),
            Hardness::Hard
        );
        assert_eq!(
            level("SELECT a FROM t EXCEPT SELECT a FROM u"),
            Hardness::Hard
        );
        assert_eq!(
            level("SELECT a, b FROM t WHERE c IN (SELECT c FROM u) ORDER BY a LIMIT 1"),
            Hardness::Extra
        );
    }

    #[test]
    fn aggregate_detection() {
        assert!(is_aggregate("count(*)"));
        assert!(is_aggregate("distinct max(t.a)"));
        assert!(!is_aggregate("max(a) - min(a)"));
        assert!(!is_aggregate("name"));
        assert!(!is_aggregate("counter(a)"));
    }
}
