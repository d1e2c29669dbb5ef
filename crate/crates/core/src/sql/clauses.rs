//! Decomposition of a query into per-clause unit sets.

use std::cell::Cell;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::normalize::NormalizedSql;
use super::parse::{
    parse_query, Expr, FromItem, JoinConstraint, Query, SelectItem, SetOpKind, TableSource,
    COMPARISON_OPS,
};
use super::SqlError;

/// Table name to column names, all lower case.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    tables: BTreeMap<String, BTreeSet<String>>,
}

impl Schema {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_table<I, S>(&mut self, table: &str, columns: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let cols = columns
            .into_iter()
            .map(|c| c.as_ref().to_lowercase())
            .collect();
        self.tables.insert(table.to_lowercase(), cols);
    }

    pub fn with_table<I, S>(mut self, table: &str, columns: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        self.add_table(table, columns);
        self
    }

    pub fn has_column(&self, table: &str, column: &str) -> bool {
        self.tables.get(table).is_some_and(|c| c.contains(column))
    }

    pub fn tables(&self) -> impl Iterator<Item = (&str, &BTreeSet<String>)> {
        self.tables.iter().map(|(t, c)| (t.as_str(), c))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operand {
    /// String literal, compared byte-exact.
    Str(String),
    Num(String),
    Column(String),
    Expr(String),
    Subquery(Box<SqlClauses>),
    List(Vec<Operand>),
    Range(Box<Operand>, Box<Operand>),
    Null,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Predicate {
    pub lhs: String,
    pub op: String,
    pub rhs: Operand,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Pred(Predicate),
    /// OR-group, kept as one unit.
    Any(BTreeSet<Condition>),
    /// AND-group below an OR or NOT.
    All(BTreeSet<Condition>),
    Not(Box<Condition>),
    Expr(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JoinUnit {
    Table(String),
    Subquery(Box<SqlClauses>),
    On(Condition),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct OrderUnit {
    pub expr: String,
    pub desc: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SetOps {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub union: Option<Box<SqlClauses>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub intersect: Option<Box<SqlClauses>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub except: Option<Box<SqlClauses>>,
}

impl SetOps {
    pub fn count(&self) -> usize {
        [&self.union, &self.intersect, &self.except]
            .iter()
            .filter(|o| o.is_some())
            .count()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SqlClauses {
    pub select: BTreeSet<String>,
    #[serde(rename = "where")]
    pub where_: BTreeSet<Condition>,
    pub join: BTreeSet<JoinUnit>,
    pub group: BTreeSet<String>,
    pub having: BTreeSet<Condition>,
    pub order: BTreeSet<OrderUnit>,
    pub limit: Option<u64>,
    pub set_ops: SetOps,
    pub nested: bool,
}

impl SqlClauses {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("clause sets serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

pub fn decompose_clauses(
    sql: &NormalizedSql,
    schema: Option<&Schema>,
) -> Result<SqlClauses, SqlError> {
    decompose_str(sql.text(), schema)
}

/// Decomposes raw query text; offsets in errors refer to `sql` itself.
pub fn decompose_str(sql: &str, schema: Option<&Schema>) -> Result<SqlClauses, SqlError> {
    if sql.trim().is_empty() {
        return Err(SqlError::EmptyQuery);
    }
    let query = parse_query(sql)?;
    Ok(decompose_query(&query, None, schema))
}

struct Scope<'s> {
    /// (visible name, base table if not a derived table)
    tables: Vec<(String, Option<String>)>,
    aliases: Vec<(String, String)>,
    parent: Option<&'s Scope<'s>>,
    schema: Option<&'s Schema>,
    nested: &'s Cell<bool>,
}

impl Scope<'_> {
    fn lookup(&self, visible: &str) -> Option<&(String, Option<String>)> {
        self.tables
            .iter()
            .find(|(v, _)| v == visible)
            .or_else(|| self.parent.and_then(|p| p.lookup(visible)))
    }

    fn owner_of(&self, column: &str) -> Option<String> {
        let schema = self.schema?;
        let mut owners: Vec<&String> = self
            .tables
            .iter()
            .filter_map(|(_, b)| b.as_ref())
            .filter(|b| schema.has_column(b, column))
            .collect();
        owners.dedup();
        match owners.len() {
            1 => Some(owners[0].clone()),
            0 => self.parent.and_then(|p| p.owner_of(column)),
            _ => None,
        }
    }

    fn column(&self, qualifier: Option<&str>, name: &str) -> String {
        match qualifier {
            Some(q) => match self.lookup(q) {
                Some((_, Some(base))) => format!("{base}.{name}"),
                _ => format!("{q}.{name}"),
            },
            None => match self.owner_of(name) {
                Some(t) => format!("{t}.{name}"),
                None => name.to_string(),
            },
        }
    }
}

fn decompose_query(q: &Query, parent: Option<&Scope<'_>>, schema: Option<&Schema>) -> SqlClauses {
    let nested = Cell::new(false);
    let mut out = decompose_core(q, parent, schema, &nested);
    if let Some((kind, rhs)) = &q.set_op {
        let right = Box::new(decompose_query(rhs, parent, schema));
        match kind {
            SetOpKind::Union => out.set_ops.union = Some(right),
            SetOpKind::Intersect => out.set_ops.intersect = Some(right),
            SetOpKind::Except => out.set_ops.except = Some(right),
        }
    }
    out.nested = nested.get();
    out
}

fn decompose_core(
    q: &Query,
    parent: Option<&Scope<'_>>,
    schema: Option<&Schema>,
    nested: &Cell<bool>,
) -> SqlClauses {
    let core = &q.core;
    let tables = core
        .from
        .iter()
        .map(|item| match &item.source {
            TableSource::Table(t) => (
                item.alias.clone().unwrap_or_else(|| t.clone()),
                Some(t.clone()),
            ),
            TableSource::Subquery(_) => (item.alias.clone().unwrap_or_default(), None),
        })
        .collect();
    let mut scope = Scope {
        tables,
        aliases: Vec::new(),
        parent,
        schema,
        nested,
    };
    let mut out = SqlClauses::default();

    let prefix = if core.distinct { "distinct " } else { "" };
    let mut aliases = Vec::new();
    for item in &core.items {
        let unit = match item {
            SelectItem::Wildcard(None) => "*".to_string(),
            SelectItem::Wildcard(Some(q)) => scope.column(Some(q), "*"),
            SelectItem::Expr { expr, alias } => {
                let r = render(expr, &scope);
                if let Some(a) = alias {
                    aliases.push((a.clone(), r.clone()));
                }
                r
            }
        };
        out.select.insert(format!("{prefix}{unit}"));
    }

    out.join = join_units(&core.from, &scope);
    if let Some(w) = &core.selection {
        out.where_ = conjuncts(w)
            .into_iter()
            .map(|c| condition(c, &scope))
            .collect();
    }
    // Select aliases are visible to GROUP BY, HAVING and ORDER BY only.
    scope.aliases = aliases;
    out.group = core.group_by.iter().map(|e| render(e, &scope)).collect();
    if let Some(h) = &core.having {
        out.having = conjuncts(h)
            .into_iter()
            .map(|c| condition(c, &scope))
            .collect();
    }
    out.order = core
        .order_by
        .iter()
        .map(|o| OrderUnit {
            expr: render(&o.expr, &scope),
            desc: o.desc,
        })
        .collect();
    out.limit = core.limit;
    out
}

fn join_units(from: &[FromItem], scope: &Scope<'_>) -> BTreeSet<JoinUnit> {
    let mut units = BTreeSet::new();
    for item in from {
        match &item.source {
            TableSource::Table(t) => {
                units.insert(JoinUnit::Table(t.clone()));
            }
            TableSource::Subquery(q) => {
                scope.nested.set(true);
                units.insert(JoinUnit::Subquery(Box::new(decompose_query(
                    q,
                    None,
                    scope.schema,
                ))));
            }
        }
        match &item.constraint {
            Some(JoinConstraint::On(e)) => {
                for c in conjuncts(e) {
                    units.insert(JoinUnit::On(condition(c, scope)));
                }
            }
            Some(JoinConstraint::Using(cols)) => {
                for c in cols {
                    units.insert(JoinUnit::On(Condition::Expr(format!("using({c})"))));
                }
            }
            None => {}
        }
    }
    units
}

fn conjuncts(e: &Expr) -> Vec<&Expr> {
    match e {
        Expr::Binary { op, left, right } if op == "and" => {
            let mut v = conjuncts(left);
            v.extend(conjuncts(right));
            v
        }
        other => vec![other],
    }
}

fn disjuncts(e: &Expr) -> Vec<&Expr> {
    match e {
        Expr::Binary { op, left, right } if op == "or" => {
            let mut v = disjuncts(left);
            v.extend(disjuncts(right));
            v
        }
        other => vec![other],
    }
}

fn condition(e: &Expr, scope: &Scope<'_>) -> Condition {
    match e {
        Expr::Binary { op, .. } if op == "or" => Condition::Any(
            disjuncts(e)
                .into_iter()
                .map(|d| condition(d, scope))
                .collect(),
        ),
        Expr::Binary { op, .. } if op == "and" => Condition::All(
            conjuncts(e)
                .into_iter()
                .map(|d| condition(d, scope))
                .collect(),
        ),
        Expr::Not(inner) => Condition::Not(Box::new(condition(inner, scope))),
        Expr::Binary { op, left, right } if COMPARISON_OPS.contains(&op.as_str()) => {
            comparison(op, left, right, scope)
        }
        Expr::IsNull { expr, negated } => Condition::Pred(Predicate {
            lhs: render(expr, scope),
            op: if *negated { "is not" } else { "is" }.into(),
            rhs: Operand::Null,
        }),
        Expr::InList {
            expr,
            list,
            negated,
        } => {
            let mut items: Vec<Operand> = list.iter().map(|x| operand(x, scope)).collect();
            items.sort();
            items.dedup();
            Condition::Pred(Predicate {
                lhs: render(expr, scope),
                op: if *negated { "not in" } else { "in" }.into(),
                rhs: Operand::List(items),
            })
        }
        Expr::InQuery {
            expr,
            query,
            negated,
        } => {
            scope.nested.set(true);
            Condition::Pred(Predicate {
                lhs: render(expr, scope),
                op: if *negated { "not in" } else { "in" }.into(),
                rhs: Operand::Subquery(Box::new(decompose_query(query, Some(scope), scope.schema))),
            })
        }
        Expr::Between {
            expr,
            low,
            high,
            negated,
        } => Condition::Pred(Predicate {
            lhs: render(expr, scope),
            op: if *negated { "not between" } else { "between" }.into(),
            rhs: Operand::Range(
                Box::new(operand(low, scope)),
                Box::new(operand(high, scope)),
            ),
        }),
        Expr::Like {
            expr,
            pattern,
            negated,
            glob,
        } => {
            let op = match (glob, negated) {
                (false, false) => "like",
                (false, true) => "not like",
                (true, false) => "glob",
                (true, true) => "not glob",
            };
            Condition::Pred(Predicate {
                lhs: render(expr, scope),
                op: op.into(),
                rhs: operand(pattern, scope),
            })
        }
        Expr::Exists { query, negated } => {
            scope.nested.set(true);
            Condition::Pred(Predicate {
                lhs: String::new(),
                op: if *negated { "not exists" } else { "exists" }.into(),
                rhs: Operand::Subquery(Box::new(decompose_query(query, Some(scope), scope.schema))),
            })
        }
        other => Condition::Expr(render(other, scope)),
    }
}

fn is_literal(e: &Expr) -> bool {
    match e {
        Expr::Number(_) | Expr::Str(_) | Expr::Null => true,
        Expr::Unary { expr, .. } => matches!(**expr, Expr::Number(_)),
        _ => false,
    }
}

fn comparison(op: &str, left: &Expr, right: &Expr, scope: &Scope<'_>) -> Condition {
    let (op, left, right) = if is_literal(left) && !is_literal(right) {
        let flipped = match op {
            "<" => ">",
            ">" => "<",
            "<=" => ">=",
            ">=" => "<=",
            o => o,
        };
        (flipped, right, left)
    } else {
        (op, left, right)
    };
    let mut lhs = render(left, scope);
    let mut rhs = operand(right, scope);
    if let Operand::Column(c) = &rhs {
        if (op == "=" || op == "!=") && *c < lhs {
            let c = c.clone();
            rhs = Operand::Column(std::mem::replace(&mut lhs, c));
        }
    }
    Condition::Pred(Predicate {
        lhs,
        op: op.into(),
        rhs,
    })
}

fn operand(e: &Expr, scope: &Scope<'_>) -> Operand {
    match e {
        Expr::Str(v) => Operand::Str(v.clone()),
        Expr::Number(n) => Operand::Num(n.clone()),
        Expr::Unary { op, expr } if op == "-" && matches!(**expr, Expr::Number(_)) => {
            let Expr::Number(n) = &**expr else {
                unreachable!()
            };
            Operand::Num(format!("-{n}"))
        }
        Expr::Null => Operand::Null,
        Expr::Column { qualifier, name } if name != "*" => {
            Operand::Column(scope.column(qualifier.as_deref(), name))
        }
        Expr::Subquery(q) => {
            scope.nested.set(true);
            Operand::Subquery(Box::new(decompose_query(q, Some(scope), scope.schema)))
        }
        other => Operand::Expr(render(other, scope)),
    }
}

fn quote(v: &str) -> String {
    format!("'{}'", v.replace('\'', "''"))
}

fn is_atomic(e: &Expr) -> bool {
    matches!(
        e,
        Expr::Column { .. }
            | Expr::Star
            | Expr::Number(_)
            | Expr::Str(_)
            | Expr::Null
            | Expr::Func { .. }
            | Expr::Cast { .. }
    )
}

fn wrapped(e: &Expr, scope: &Scope<'_>) -> String {
    if is_atomic(e) {
        render(e, scope)
    } else {
        format!("({})", render(e, scope))
    }
}

fn subquery_text(q: &Query, scope: &Scope<'_>) -> String {
    scope.nested.set(true);
    format!("({})", q.text)
}

/// Canonical lower-case rendering of an expression with aliases resolved.
fn render(e: &Expr, scope: &Scope<'_>) -> String {
    match e {
        Expr::Column {
            qualifier: None,
            name,
        } => {
            if let Some((_, r)) = scope.aliases.iter().find(|(a, _)| a == name) {
                if scope.owner_of(name).is_none() {
                    return r.clone();
                }
            }
            scope.column(None, name)
        }
        Expr::Column { qualifier, name } => scope.column(qualifier.as_deref(), name),
        Expr::Star => "*".into(),
        Expr::Number(n) => n.clone(),
        Expr::Str(v) => quote(v),
        Expr::Null => "null".into(),
        Expr::Func {
            name,
            distinct,
            args,
        } => {
            let args: Vec<String> = args.iter().map(|a| render(a, scope)).collect();
            let d = if *distinct { "distinct " } else { "" };
            format!("{name}({d}{})", args.join(", "))
        }
        Expr::Unary { op, expr } => format!("{op}{}", wrapped(expr, scope)),
        Expr::Binary { op, left, right } => {
            format!("{} {op} {}", wrapped(left, scope), wrapped(right, scope))
        }
        Expr::Not(inner) => format!("not {}", wrapped(inner, scope)),
        Expr::IsNull { expr, negated } => {
            format!(
                "{} is {}null",
                wrapped(expr, scope),
                if *negated { "not " } else { "" }
            )
        }
        Expr::InList {
            expr,
            list,
            negated,
        } => {
            let items: Vec<String> = list.iter().map(|x| render(x, scope)).collect();
            format!(
                "{} {}in ({})",
                wrapped(expr, scope),
                not(*negated),
                items.join(", ")
            )
        }
        Expr::InQuery {
            expr,
            query,
            negated,
        } => {
            format!(
                "{} {}in {}",
                wrapped(expr, scope),
                not(*negated),
                subquery_text(query, scope)
            )
        }
        Expr::Between {
            expr,
            low,
            high,
            negated,
        } => format!(
            "{} {}between {} and {}",
            wrapped(expr, scope),
            not(*negated),
            wrapped(low, scope),
            wrapped(high, scope)
        ),
        Expr::Like {
            expr,
            pattern,
            negated,
            glob,
        } => format!(
            "{} {}{} {}",
            wrapped(expr, scope),
            not(*negated),
            if *glob { "glob" } else { "like" },
            wrapped(pattern, scope)
        ),
        Expr::Exists { query, negated } => {
            format!("{}exists {}", not(*negated), subquery_text(query, scope))
        }
        Expr::Subquery(q) => subquery_text(q, scope),
        Expr::Case {
            operand,
            whens,
            otherwise,
        } => {
            let mut s = String::from("case");
            if let Some(o) = operand {
                s.push(' ');
                s.push_str(&wrapped(o, scope));
            }
            for (w, t) in whens {
                s.push_str(&format!(
                    " when {} then {}",
                    wrapped(w, scope),
                    wrapped(t, scope)
                ));
            }
            if let Some(o) = otherwise {
                s.push_str(&format!(" else {}", wrapped(o, scope)));
            }
            s.push_str(" end");
            s
        }
        Expr::Cast { expr, ty } => format!("cast({} as {ty})", render(expr, scope)),
    }
}

fn not(negated: bool) -> &'static str {
    if negated {
        "not "
    } else {
        ""
    }
}
