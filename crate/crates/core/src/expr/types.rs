//! Static type rules.
//!
//! | construct                | operands                                  | result  |
//! |--------------------------|-------------------------------------------|---------|
//! | `+ - * /`, unary `-`     | numeric (number or boolean)               | number  |
//! | `== !=`                  | numeric pair, or text vs. string literal  | boolean |
//! | `< <= > >=`              | numeric pair                              | boolean |
//! | `and or not`             | boolean (0/1-valued)                      | boolean |
//! | `log abs clip`           | numeric                                   | number  |
//! | `min max`                | numeric                                   | boolean if both boolean, else number |
//! | `matches(t, 'p')`        | text subject                              | boolean |

use std::fmt;

use super::{BinaryOp, Expr, Func, UnaryOp};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StaticType {
    Number,
    /// Numeric and guaranteed 0/1.
    Boolean,
    Text,
}

impl StaticType {
    fn numeric(self) -> bool {
        matches!(self, StaticType::Number | StaticType::Boolean)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TypeIssue {
    UnknownColumn(String),
    Misuse(String),
}

impl fmt::Display for TypeIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeIssue::UnknownColumn(c) => write!(f, "unknown column `{c}`"),
            TypeIssue::Misuse(m) => f.write_str(m),
        }
    }
}

/// Type-checks `expr`, resolving column types through `resolve`. Returns
/// every issue found; an empty list means the expression is well typed.
pub fn check(expr: &Expr, resolve: &dyn Fn(&str) -> Option<StaticType>) -> Vec<TypeIssue> {
    let mut issues = Vec::new();
    infer(expr, resolve, &mut issues);
    issues
}

/// Result type of `expr`, or None when it cannot be typed.
pub fn static_type(expr: &Expr, resolve: &dyn Fn(&str) -> Option<StaticType>) -> Option<StaticType> {
    let mut issues = Vec::new();
    let t = infer(expr, resolve, &mut issues);
    if issues.is_empty() {
        t
    } else {
        None
    }
}

fn describe(e: &Expr) -> String {
    match e {
        Expr::Column(c) => format!("column `{c}`"),
        other => format!("`{other}`"),
    }
}

fn text_noun(e: &Expr) -> String {
    match e {
        Expr::Column(c) => format!("text column `{c}`"),
        Expr::Str(s) => format!("string literal '{s}'"),
        other => format!("text value `{other}`"),
    }
}

// None means the type is unknown because of an earlier issue; callers stay
// quiet about unknown operands to avoid cascades.
fn infer(
    expr: &Expr,
    resolve: &dyn Fn(&str) -> Option<StaticType>,
    issues: &mut Vec<TypeIssue>,
) -> Option<StaticType> {
    match expr {
        Expr::Number(n) => Some(if *n == 0.0 || *n == 1.0 {
            StaticType::Boolean
        } else {
            StaticType::Number
        }),
        Expr::Str(_) => Some(StaticType::Text),
        Expr::Column(c) => {
            let t = resolve(c);
            if t.is_none() {
                issues.push(TypeIssue::UnknownColumn(c.clone()));
            }
            t
        }
        Expr::Unary(op, inner) => {
            let t = infer(inner, resolve, issues);
            match (op, t) {
                (_, None) => None,
                (UnaryOp::Neg, Some(t)) => {
                    if t == StaticType::Text {
                        issues.push(TypeIssue::Misuse(format!("negation of {}", text_noun(inner))));
                    }
                    Some(StaticType::Number)
                }
                (UnaryOp::Not, Some(t)) => {
                    if t != StaticType::Boolean {
                        issues.push(TypeIssue::Misuse(format!(
                            "`not` requires a 0/1-valued operand, got {}",
                            describe(inner)
                        )));
                    }
                    Some(StaticType::Boolean)
                }
            }
        }
        Expr::Binary(op, lhs, rhs) => {
            let lt = infer(lhs, resolve, issues);
            let rt = infer(rhs, resolve, issues);
            binary(*op, lhs, lt, rhs, rt, issues)
        }
        Expr::Call(call) => {
            let types: Vec<Option<StaticType>> =
                call.args.iter().map(|a| infer(a, resolve, issues)).collect();
            match call.func {
                Func::Matches => {
                    if types[0].is_some_and(|t| t != StaticType::Text) {
                        issues.push(TypeIssue::Misuse(format!(
                            "`matches` requires a text subject, got {}",
                            describe(&call.args[0])
                        )));
                    }
                    Some(StaticType::Boolean)
                }
                f => {
                    for (arg, t) in call.args.iter().zip(&types) {
                        if *t == Some(StaticType::Text) {
                            issues.push(TypeIssue::Misuse(format!(
                                "`{}` applied to {}",
                                f.name(),
                                text_noun(arg)
                            )));
                        }
                    }
                    let all_bool = types.iter().all(|t| *t == Some(StaticType::Boolean));
                    Some(if matches!(f, Func::Min | Func::Max) && all_bool {
                        StaticType::Boolean
                    } else {
                        StaticType::Number
                    })
                }
            }
        }
    }
}

fn binary(
    op: BinaryOp,
    lhs: &Expr,
    lt: Option<StaticType>,
    rhs: &Expr,
    rt: Option<StaticType>,
    issues: &mut Vec<TypeIssue>,
) -> Option<StaticType> {
    if op.is_arithmetic() {
        for (e, t) in [(lhs, lt), (rhs, rt)] {
            if t == Some(StaticType::Text) {
                issues.push(TypeIssue::Misuse(format!("arithmetic on {}", text_noun(e))));
            }
        }
        return Some(StaticType::Number);
    }
    if op.is_logical() {
        for (e, t) in [(lhs, lt), (rhs, rt)] {
            if t.is_some_and(|t| t != StaticType::Boolean) {
                issues.push(TypeIssue::Misuse(format!(
                    "`{}` requires 0/1-valued operands, got {}",
                    op.symbol(),
                    describe(e)
                )));
            }
        }
        return Some(StaticType::Boolean);
    }
    // comparisons
    let (Some(l), Some(r)) = (lt, rt) else {
        return Some(StaticType::Boolean);
    };
    match (l.numeric(), r.numeric()) {
        (true, true) => {}
        (false, false) if matches!(op, BinaryOp::Eq | BinaryOp::Ne) => {
            let literal = matches!(lhs, Expr::Str(_)) || matches!(rhs, Expr::Str(_));
            if !literal {
                issues.push(TypeIssue::Misuse(format!(
                    "text comparison `{}` requires a string literal operand",
                    op.symbol()
                )));
            }
        }
        (false, false) => issues.push(TypeIssue::Misuse(format!(
            "ordering comparison `{}` on text values",
            op.symbol()
        ))),
        _ => issues.push(TypeIssue::Misuse(format!(
            "comparison `{}` between text and number ({} vs {})",
            op.symbol(),
            describe(lhs),
            describe(rhs)
        ))),
    }
    Some(StaticType::Boolean)
}
