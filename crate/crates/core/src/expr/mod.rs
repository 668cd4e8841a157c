//! Expression language for objectives, metric gains/predicates and slice
//! predicates.
//!
//! The grammar, loosest to tightest binding:
//!
//! ```text
//! or_expr   := and_expr ('or' and_expr)*
//! and_expr  := cmp_expr ('and' cmp_expr)*
//! cmp_expr  := add_expr (('==' | '!=' | '<' | '<=' | '>' | '>=') add_expr)?
//! add_expr  := mul_expr (('+' | '-') mul_expr)*
//! mul_expr  := unary (('*' | '/') unary)*
//! unary     := ('-' | 'not') unary | primary
//! primary   := number | string | column | func '(' args ')' | '(' or_expr ')'
//! ```
//!
//! Comparisons do not chain (`a < b < c` is rejected). Comparisons and
//! boolean operators evaluate to exactly `0.0` or `1.0`. Number literals are
//! always nonnegative in parsed trees; a leading minus is a unary node.

mod eval;
mod format;
mod lexer;
mod parser;
mod types;

use std::fmt;
use std::sync::Arc;

use regex::Regex;
use serde::{Deserialize, Serialize};

pub use eval::{evaluate, Bindings, EvalContext, EvalError, ValueRef, Warnings};
pub use format::format;
pub use parser::parse;
pub use types::{check, static_type, StaticType, TypeIssue};

/// A scalar cell value: numbers (booleans are stored as 0/1) or text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Num(f64),
    Text(Arc<str>),
}

impl Value {
    pub fn as_ref(&self) -> ValueRef<'_> {
        match self {
            Value::Num(n) => ValueRef::Num(*n),
            Value::Text(s) => ValueRef::Text(s),
        }
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Num(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(Arc::from(v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::And => "and",
            BinaryOp::Or => "or",
        }
    }

    pub(crate) fn precedence(self) -> u8 {
        match self {
            BinaryOp::Or => 1,
            BinaryOp::And => 2,
            BinaryOp::Eq
            | BinaryOp::Ne
            | BinaryOp::Lt
            | BinaryOp::Le
            | BinaryOp::Gt
            | BinaryOp::Ge => 3,
            BinaryOp::Add | BinaryOp::Sub => 4,
            BinaryOp::Mul | BinaryOp::Div => 5,
        }
    }

    pub fn is_comparison(self) -> bool {
        self.precedence() == 3
    }

    pub fn is_logical(self) -> bool {
        matches!(self, BinaryOp::And | BinaryOp::Or)
    }

    pub fn is_arithmetic(self) -> bool {
        self.precedence() >= 4
    }
}

/// Builtin function table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Log,
    Abs,
    Min,
    Max,
    Clip,
    Matches,
}

impl Func {
    pub const ALL: [Func; 6] = [Func::Log, Func::Abs, Func::Min, Func::Max, Func::Clip, Func::Matches];

    pub fn name(self) -> &'static str {
        match self {
            Func::Log => "log",
            Func::Abs => "abs",
            Func::Min => "min",
            Func::Max => "max",
            Func::Clip => "clip",
            Func::Matches => "matches",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Log | Func::Abs => 1,
            Func::Min | Func::Max | Func::Matches => 2,
            Func::Clip => 3,
        }
    }
}

/// Compiled regex for `matches`; equality is by source text.
#[derive(Clone)]
pub struct Pattern(Arc<Regex>);

impl Pattern {
    pub fn new(source: &str) -> Result<Pattern, regex::Error> {
        Regex::new(source).map(|r| Pattern(Arc::new(r)))
    }

    pub fn as_str(&self) -> &str {
        self.0.as_str()
    }

    pub fn is_match(&self, text: &str) -> bool {
        self.0.is_match(text)
    }
}

impl PartialEq for Pattern {
    fn eq(&self, other: &Self) -> bool {
        self.as_str() == other.as_str()
    }
}

impl fmt::Debug for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Pattern({:?})", self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Call {
    pub func: Func,
    pub args: Vec<Expr>,
    pattern: Option<Pattern>,
}

impl Call {
    /// Checks arity; `matches` requires a string literal pattern, compiled here.
    pub fn new(func: Func, args: Vec<Expr>) -> Result<Call, String> {
        if args.len() != func.arity() {
            return Err(format!(
                "`{}` takes {} argument(s), got {}",
                func.name(),
                func.arity(),
                args.len()
            ));
        }
        let pattern = if func == Func::Matches {
            match &args[1] {
                Expr::Str(src) => Some(Pattern::new(src).map_err(|e| format!("invalid pattern: {e}"))?),
                _ => return Err("`matches` pattern must be a string literal".into()),
            }
        } else {
            None
        };
        Ok(Call { func, args, pattern })
    }

    pub fn pattern(&self) -> Option<&Pattern> {
        self.pattern.as_ref()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Number(f64),
    Str(String),
    Column(String),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Call(Call),
}

impl Expr {
    pub fn column(name: impl Into<String>) -> Expr {
        Expr::Column(name.into())
    }

    pub fn string(s: impl Into<String>) -> Expr {
        Expr::Str(s.into())
    }

    pub fn unary(op: UnaryOp, e: Expr) -> Expr {
        Expr::Unary(op, Box::new(e))
    }

    pub fn binary(op: BinaryOp, l: Expr, r: Expr) -> Expr {
        Expr::Binary(op, Box::new(l), Box::new(r))
    }

    /// Names of every column the expression reads, in first-use order.
    pub fn columns(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.visit_columns(&mut out);
        out
    }

    fn visit_columns<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Expr::Column(c) => {
                if !out.contains(&c.as_str()) {
                    out.push(c);
                }
            }
            Expr::Unary(_, e) => e.visit_columns(out),
            Expr::Binary(_, l, r) => {
                l.visit_columns(out);
                r.visit_columns(out);
            }
            Expr::Call(call) => call.args.iter().for_each(|a| a.visit_columns(out)),
            Expr::Number(_) | Expr::Str(_) => {}
        }
    }

    /// True when the root always yields 0/1: comparisons, boolean ops, `not`, `matches`.
    pub fn is_boolean_root(&self) -> bool {
        match self {
            Expr::Binary(op, _, _) => op.is_comparison() || op.is_logical(),
            Expr::Unary(UnaryOp::Not, _) => true,
            Expr::Call(c) => c.func == Func::Matches,
            _ => false,
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format(self))
    }
}

impl std::str::FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("parse error at byte {offset}: expected {}, found {found}", expected.join(" or "))]
pub struct ParseError {
    pub offset: usize,
    pub expected: Vec<String>,
    pub found: String,
}

impl ParseError {
    pub(crate) fn new(offset: usize, expected: Vec<String>, found: String) -> ParseError {
        ParseError { offset, expected, found }
    }
}
