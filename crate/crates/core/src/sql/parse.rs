//! Recursive-descent parser for single SELECT statements with set operations
//! and nested subqueries.

use super::normalize::render_tokens;
use super::token::{tokenize, Token, TokenKind};
use super::SqlError;

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub core: SelectCore,
    pub set_op: Option<(SetOpKind, Box<Query>)>,
    /// Normalized text of the query's own tokens.
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SetOpKind {
    Union,
    Intersect,
    Except,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SelectCore {
    pub distinct: bool,
    pub items: Vec<SelectItem>,
    pub from: Vec<FromItem>,
    pub selection: Option<Expr>,
    pub group_by: Vec<Expr>,
    pub having: Option<Expr>,
    pub order_by: Vec<OrderItem>,
    pub limit: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SelectItem {
    Wildcard(Option<String>),
    Expr { expr: Expr, alias: Option<String> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum TableSource {
    Table(String),
    Subquery(Box<Query>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum JoinConstraint {
    On(Expr),
    Using(Vec<String>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FromItem {
    pub source: TableSource,
    pub alias: Option<String>,
    pub constraint: Option<JoinConstraint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderItem {
    pub expr: Expr,
    pub desc: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Column {
        qualifier: Option<String>,
        name: String,
    },
    Star,
    Number(String),
    Str(String),
    Null,
    Func {
        name: String,
        distinct: bool,
        args: Vec<Expr>,
    },
    Unary {
        op: String,
        expr: Box<Expr>,
    },
    Binary {
        op: String,
        left: Box<Expr>,
        right: Box<Expr>,
    },
    Not(Box<Expr>),
    IsNull {
        expr: Box<Expr>,
        negated: bool,
    },
    InList {
        expr: Box<Expr>,
        list: Vec<Expr>,
        negated: bool,
    },
    InQuery {
        expr: Box<Expr>,
        query: Box<Query>,
        negated: bool,
    },
    Between {
        expr: Box<Expr>,
        low: Box<Expr>,
        high: Box<Expr>,
        negated: bool,
    },
    Like {
        expr: Box<Expr>,
        pattern: Box<Expr>,
        negated: bool,
        glob: bool,
    },
    Exists {
        query: Box<Query>,
        negated: bool,
    },
    Subquery(Box<Query>),
    Case {
        operand: Option<Box<Expr>>,
        whens: Vec<(Expr, Expr)>,
        otherwise: Option<Box<Expr>>,
    },
    Cast {
        expr: Box<Expr>,
        ty: String,
    },
}

pub const COMPARISON_OPS: &[&str] = &["=", "!=", "<", ">", "<=", ">="];

pub fn parse_query(sql: &str) -> Result<Query, SqlError> {
    let tokens = tokenize(sql).map_err(|e| SqlError::Parse {
        offset: e.offset,
        expected: "closing quote".into(),
        found: e.what.into(),
    })?;
    let mut p = Parser {
        tokens: &tokens,
        pos: 0,
        src_len: sql.len(),
    };
    let q = p.query()?;
    while p.eat_symbol(";") {}
    if p.pos < tokens.len() {
        return Err(p.unexpected("end of query"));
    }
    Ok(q)
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    src_len: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a Token> {
        self.tokens.get(self.pos)
    }

    fn peek_at(&self, ahead: usize) -> Option<&'a Token> {
        self.tokens.get(self.pos + ahead)
    }

    fn unexpected(&self, expected: &str) -> SqlError {
        match self.peek() {
            Some(t) => SqlError::Parse {
                offset: t.offset,
                expected: expected.into(),
                found: t.text().into(),
            },
            None => SqlError::Parse {
                offset: self.src_len,
                expected: expected.into(),
                found: "end of input".into(),
            },
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        self.peek().is_some_and(|t| t.is_keyword(kw))
    }

    fn at_symbol(&self, sym: &str) -> bool {
        self.peek().is_some_and(|t| t.is_symbol(sym))
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.at_keyword(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_symbol(&mut self, sym: &str) -> bool {
        if self.at_symbol(sym) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), SqlError> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            Err(self.unexpected(kw))
        }
    }

    fn expect_symbol(&mut self, sym: &str) -> Result<(), SqlError> {
        if self.eat_symbol(sym) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("'{sym}'")))
        }
    }

    fn ident(&mut self) -> Result<String, SqlError> {
        match self.peek().map(|t| &t.kind) {
            Some(TokenKind::Ident(name)) => {
                self.pos += 1;
                Ok(name.clone())
            }
            // `"name"` aliases are common in hand-written SQL.
            Some(TokenKind::Str { value, .. }) => {
                self.pos += 1;
                Ok(value.to_lowercase())
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    fn query(&mut self) -> Result<Query, SqlError> {
        let start = self.pos;
        let core = self.select_core()?;
        let kind = if self.eat_keyword("UNION") {
            self.eat_keyword("ALL");
            Some(SetOpKind::Union)
        } else if self.eat_keyword("INTERSECT") {
            Some(SetOpKind::Intersect)
        } else if self.eat_keyword("EXCEPT") {
            Some(SetOpKind::Except)
        } else {
            None
        };
        let set_op = match kind {
            Some(k) => Some((k, Box::new(self.query()?))),
            None => None,
        };
        let text = render_tokens(&self.tokens[start..self.pos]);
        Ok(Query { core, set_op, text })
    }

    fn select_core(&mut self) -> Result<SelectCore, SqlError> {
        self.expect_keyword("SELECT")?;
        let mut core = SelectCore {
            distinct: self.eat_keyword("DISTINCT"),
            ..Default::default()
        };
        if !core.distinct {
            self.eat_keyword("ALL");
        }
        loop {
            core.items.push(self.select_item()?);
            if !self.eat_symbol(",") {
                break;
            }
        }
        if self.eat_keyword("FROM") {
            core.from = self.parse_from()?;
        }
        if self.eat_keyword("WHERE") {
            core.selection = Some(self.expr()?);
        }
        if self.eat_keyword("GROUP") {
            self.expect_keyword("BY")?;
            loop {
                core.group_by.push(self.expr()?);
                if !self.eat_symbol(",") {
                    break;
                }
            }
        }
        if self.eat_keyword("HAVING") {
            core.having = Some(self.expr()?);
        }
        if self.eat_keyword("ORDER") {
            self.expect_keyword("BY")?;
            loop {
                let expr = self.expr()?;
                let desc = if self.eat_keyword("DESC") {
                    true
                } else {
                    self.eat_keyword("ASC");
                    false
                };
                core.order_by.push(OrderItem { expr, desc });
                if !self.eat_symbol(",") {
                    break;
                }
            }
        }
        if self.eat_keyword("LIMIT") {
            core.limit = Some(self.integer()?);
            if self.eat_keyword("OFFSET") || self.eat_symbol(",") {
                self.integer()?;
            }
        }
        Ok(core)
    }

    fn integer(&mut self) -> Result<u64, SqlError> {
        match self.peek().map(|t| &t.kind) {
            Some(TokenKind::Number(n)) => {
                let v = n
                    .parse::<u64>()
                    .map_err(|_| self.unexpected("non-negative integer"))?;
                self.pos += 1;
                Ok(v)
            }
            _ => Err(self.unexpected("non-negative integer")),
        }
    }

    fn select_item(&mut self) -> Result<SelectItem, SqlError> {
        if self.eat_symbol("*") {
            return Ok(SelectItem::Wildcard(None));
        }
        if matches!(self.peek().map(|t| &t.kind), Some(TokenKind::Ident(_)))
            && self.peek_at(1).is_some_and(|t| t.is_symbol("."))
            && self.peek_at(2).is_some_and(|t| t.is_symbol("*"))
        {
            let q = self.ident()?;
            self.pos += 2;
            return Ok(SelectItem::Wildcard(Some(q)));
        }
        let expr = self.expr()?;
        let alias = self.alias()?;
        Ok(SelectItem::Expr { expr, alias })
    }

    fn alias(&mut self) -> Result<Option<String>, SqlError> {
        if self.eat_keyword("AS") {
            return self.ident().map(Some);
        }
        if matches!(self.peek().map(|t| &t.kind), Some(TokenKind::Ident(_))) {
            return self.ident().map(Some);
        }
        Ok(None)
    }

    fn parse_from(&mut self) -> Result<Vec<FromItem>, SqlError> {
        let mut items = vec![self.table_ref()?];
        loop {
            if self.eat_symbol(",") {
                items.push(self.table_ref()?);
                continue;
            }
            let save = self.pos;
            let natural = self.eat_keyword("NATURAL");
            if self.eat_keyword("LEFT") || self.eat_keyword("RIGHT") || self.eat_keyword("FULL") {
                self.eat_keyword("OUTER");
            } else {
                let _ = self.eat_keyword("INNER") || self.eat_keyword("CROSS");
            }
            if !self.eat_keyword("JOIN") {
                if self.pos != save || natural {
                    return Err(self.unexpected("JOIN"));
                }
                break;
            }
            let mut item = self.table_ref()?;
            if self.eat_keyword("ON") {
                item.constraint = Some(JoinConstraint::On(self.expr()?));
            } else if self.eat_keyword("USING") {
                self.expect_symbol("(")?;
                let mut cols = vec![self.ident()?];
                while self.eat_symbol(",") {
                    cols.push(self.ident()?);
                }
                self.expect_symbol(")")?;
                item.constraint = Some(JoinConstraint::Using(cols));
            }
            items.push(item);
        }
        Ok(items)
    }

    fn table_ref(&mut self) -> Result<FromItem, SqlError> {
        let source = if self.eat_symbol("(") {
            let q = self.query()?;
            self.expect_symbol(")")?;
            TableSource::Subquery(Box::new(q))
        } else {
            TableSource::Table(self.ident()?)
        };
        let alias = self.alias()?;
        Ok(FromItem {
            source,
            alias,
            constraint: None,
        })
    }

    pub fn expr(&mut self) -> Result<Expr, SqlError> {
        self.or_expr()
    }

    fn or_expr(&mut self) -> Result<Expr, SqlError> {
        let mut left = self.and_expr()?;
        while self.eat_keyword("OR") {
            let right = self.and_expr()?;
            left = Expr::Binary {
                op: "or".into(),
                left: Box::new(left),
                right: Box::new(right),
            };
        }
        Ok(left)
    }

    fn and_expr(&mut self) -> Result<Expr, SqlError> {
        let mut left = self.not_expr()?;
        while self.eat_keyword("AND") {
            let right = self.not_expr()?;
            left = Expr::Binary {
                op: "and".into(),
                left: Box::new(left),
                right: Box::new(right),
            };
        }
        Ok(left)
    }

    fn not_expr(&mut self) -> Result<Expr, SqlError> {
        if self.at_keyword("NOT") && !self.peek_at(1).is_some_and(|t| t.is_keyword("EXISTS")) {
            self.pos += 1;
            return Ok(Expr::Not(Box::new(self.not_expr()?)));
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<Expr, SqlError> {
        let mut left = self.concat()?;
        loop {
            if let Some(TokenKind::Symbol(sym)) = self.peek().map(|t| &t.kind) {
                let op = match sym.as_str() {
                    "==" => "=",
                    "<>" => "!=",
                    s if COMPARISON_OPS.contains(&s) => s,
                    _ => break,
                };
                let op = op.to_string();
                self.pos += 1;
                let right = self.concat()?;
                left = Expr::Binary {
                    op,
                    left: Box::new(left),
                    right: Box::new(right),
                };
                continue;
            }
            if self.eat_keyword("IS") {
                let negated = self.eat_keyword("NOT");
                if self.eat_keyword("NULL") {
                    left = Expr::IsNull {
                        expr: Box::new(left),
                        negated,
                    };
                } else {
                    let right = self.concat()?;
                    let op = if negated { "!=" } else { "=" };
                    left = Expr::Binary {
                        op: op.into(),
                        left: Box::new(left),
                        right: Box::new(right),
                    };
                }
                continue;
            }
            let negated = self.at_keyword("NOT")
                && self.peek_at(1).is_some_and(|t| {
                    t.is_keyword("IN")
                        || t.is_keyword("BETWEEN")
                        || t.is_keyword("LIKE")
                        || t.is_keyword("GLOB")
                });
            if negated {
                self.pos += 1;
            }
            if self.eat_keyword("IN") {
                self.expect_symbol("(")?;
                if self.at_keyword("SELECT") {
                    let q = self.query()?;
                    self.expect_symbol(")")?;
                    left = Expr::InQuery {
                        expr: Box::new(left),
                        query: Box::new(q),
                        negated,
                    };
                } else {
                    let mut list = Vec::new();
                    if !self.at_symbol(")") {
                        loop {
                            list.push(self.expr()?);
                            if !self.eat_symbol(",") {
                                break;
                            }
                        }
                    }
                    self.expect_symbol(")")?;
                    left = Expr::InList {
                        expr: Box::new(left),
                        list,
                        negated,
                    };
                }
                continue;
            }
            if self.eat_keyword("BETWEEN") {
                let low = self.concat()?;
                self.expect_keyword("AND")?;
                let high = self.concat()?;
                left = Expr::Between {
                    expr: Box::new(left),
                    low: Box::new(low),
                    high: Box::new(high),
                    negated,
                };
                continue;
            }
            let glob = self.at_keyword("GLOB");
            if self.eat_keyword("LIKE") || self.eat_keyword("GLOB") {
                let pattern = self.concat()?;
                left = Expr::Like {
                    expr: Box::new(left),
                    pattern: Box::new(pattern),
                    negated,
                    glob,
                };
                continue;
            }
            if negated {
                return Err(self.unexpected("IN, BETWEEN or LIKE"));
            }
            break;
        }
        Ok(left)
    }

    fn concat(&mut self) -> Result<Expr, SqlError> {
        let mut left = self.additive()?;
        while self.eat_symbol("||") {
            let right = self.additive()?;
            left = Expr::Binary {
                op: "||".into(),
                left: Box::new(left),
                right: Box::new(right),
            };
        }
        Ok(left)
    }

    fn additive(&mut self) -> Result<Expr, SqlError> {
        let mut left = self.multiplicative()?;
        loop {
            let op = if self.eat_symbol("+") {
                "+"
            } else if self.eat_symbol("-") {
                "-"
            } else {
                break;
            };
            let right = self.multiplicative()?;
            left = Expr::Binary {
                op: op.into(),
                left: Box::new(left),
                right: Box::new(right),
            };
        }
        Ok(left)
    }

    fn multiplicative(&mut self) -> Result<Expr, SqlError> {
        let mut left = self.unary()?;
        loop {
            let op = if self.eat_symbol("*") {
                "*"
            } else if self.eat_symbol("/") {
                "/"
            } else if self.eat_symbol("%") {
                "%"
            } else {
                break;
            };
            let right = self.unary()?;
            left = Expr::Binary {
                op: op.into(),
                left: Box::new(left),
                right: Box::new(right),
            };
        }
        Ok(left)
    }

    fn unary(&mut self) -> Result<Expr, SqlError> {
        if self.eat_symbol("-") {
            return Ok(Expr::Unary {
                op: "-".into(),
                expr: Box::new(self.unary()?),
            });
        }
        if self.eat_symbol("+") {
            return self.unary();
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, SqlError> {
        let Some(tok) = self.peek() else {
            return Err(self.unexpected("expression"));
        };
        match &tok.kind {
            TokenKind::Number(n) => {
                self.pos += 1;
                Ok(Expr::Number(n.clone()))
            }
            TokenKind::Str { value, .. } => {
                self.pos += 1;
                Ok(Expr::Str(value.clone()))
            }
            TokenKind::Symbol(s) if s == "*" => {
                self.pos += 1;
                Ok(Expr::Star)
            }
            TokenKind::Symbol(s) if s == "(" => {
                self.pos += 1;
                let e = if self.at_keyword("SELECT") {
                    Expr::Subquery(Box::new(self.query()?))
                } else {
                    self.expr()?
                };
                self.expect_symbol(")")?;
                Ok(e)
            }
            TokenKind::Keyword(k) => match k.as_str() {
                "NULL" => {
                    self.pos += 1;
                    Ok(Expr::Null)
                }
                "NOT" | "EXISTS" => {
                    let negated = self.eat_keyword("NOT");
                    self.expect_keyword("EXISTS")?;
                    self.expect_symbol("(")?;
                    let q = self.query()?;
                    self.expect_symbol(")")?;
                    Ok(Expr::Exists {
                        query: Box::new(q),
                        negated,
                    })
                }
                "COUNT" | "SUM" | "AVG" | "MIN" | "MAX" | "REPLACE" => {
                    let name = k.to_ascii_lowercase();
                    self.pos += 1;
                    self.call(name)
                }
                "CAST" => {
                    self.pos += 1;
                    self.expect_symbol("(")?;
                    let e = self.expr()?;
                    self.expect_keyword("AS")?;
                    let ty = self.ident()?;
                    self.expect_symbol(")")?;
                    Ok(Expr::Cast {
                        expr: Box::new(e),
                        ty,
                    })
                }
                "CASE" => {
                    self.pos += 1;
                    self.case_expr()
                }
                _ => Err(self.unexpected("expression")),
            },
            TokenKind::Ident(name) => {
                let name = name.clone();
                self.pos += 1;
                if self.at_symbol("(") {
                    return self.call(name);
                }
                if self.eat_symbol(".") {
                    if self.eat_symbol("*") {
                        return Ok(Expr::Column {
                            qualifier: Some(name),
                            name: "*".into(),
                        });
                    }
                    let col = self.ident()?;
                    return Ok(Expr::Column {
                        qualifier: Some(name),
                        name: col,
                    });
                }
                Ok(Expr::Column {
                    qualifier: None,
                    name,
                })
            }
            _ => Err(self.unexpected("expression")),
        }
    }

    fn call(&mut self, name: String) -> Result<Expr, SqlError> {
        self.expect_symbol("(")?;
        let distinct = self.eat_keyword("DISTINCT");
        let mut args = Vec::new();
        if !self.at_symbol(")") {
            loop {
                args.push(self.expr()?);
                if !self.eat_symbol(",") {
                    break;
                }
            }
        }
        self.expect_symbol(")")?;
        Ok(Expr::Func {
            name,
            distinct,
            args,
        })
    }

    fn case_expr(&mut self) -> Result<Expr, SqlError> {
        let operand = if self.at_keyword("WHEN") {
            None
        } else {
            Some(Box::new(self.expr()?))
        };
        let mut whens = Vec::new();
        while self.eat_keyword("WHEN") {
            let cond = self.expr()?;
            self.expect_keyword("THEN")?;
            whens.push((cond, self.expr()?));
        }
        if whens.is_empty() {
            return Err(self.unexpected("WHEN"));
        }
        let otherwise = if self.eat_keyword("ELSE") {
            Some(Box::new(self.expr()?))
        } else {
            None
        };
        self.expect_keyword("END")?;
        Ok(Expr::Case {
            operand,
            whens,
            otherwise,
        })
    }
}
