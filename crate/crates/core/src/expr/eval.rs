use std::collections::HashMap;

use super::{BinaryOp, Expr, Func, UnaryOp, Value};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ValueRef<'a> {
    Num(f64),
    Text(&'a str),
}

/// Source of column values during evaluation.
pub trait Bindings {
    fn lookup(&self, name: &str) -> Option<ValueRef<'_>>;
}

/// A plain name → value map, mostly useful for tests and ad-hoc evaluation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalContext {
    bindings: HashMap<String, Value>,
}

impl EvalContext {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, value: impl Into<Value>) -> Self {
        self.bindings.insert(name.to_string(), value.into());
        self
    }

    pub fn insert(&mut self, name: &str, value: impl Into<Value>) {
        self.bindings.insert(name.to_string(), value.into());
    }
}

impl Bindings for EvalContext {
    fn lookup(&self, name: &str) -> Option<ValueRef<'_>> {
        self.bindings.get(name).map(Value::as_ref)
    }
}

/// Degenerate-input counters. Division by zero and log of a nonpositive
/// value yield 0.0 and bump a counter instead of failing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Warnings {
    pub division_by_zero: u64,
    pub log_domain: u64,
}

impl Warnings {
    pub fn total(&self) -> u64 {
        self.division_by_zero + self.log_domain
    }

    pub fn merge(&mut self, other: Warnings) {
        self.division_by_zero += other.division_by_zero;
        self.log_domain += other.log_domain;
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("unbound column `{0}`")]
    UnboundColumn(String),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
}

/// Evaluates `expr` against `ctx`, returning the value and the warnings it raised.
pub fn evaluate(expr: &Expr, ctx: &dyn Bindings) -> Result<(f64, Warnings), EvalError> {
    let mut w = Warnings::default();
    let v = expr.eval(ctx, &mut w)?;
    Ok((v, w))
}

fn truth(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn num(v: ValueRef<'_>, what: &str) -> Result<f64, EvalError> {
    match v {
        ValueRef::Num(n) => Ok(n),
        ValueRef::Text(t) => Err(EvalError::TypeMismatch(format!("{what} on text value '{t}'"))),
    }
}

impl Expr {
    /// Numeric evaluation; text-valued results are a type mismatch.
    pub fn eval(&self, ctx: &dyn Bindings, warnings: &mut Warnings) -> Result<f64, EvalError> {
        let v = self.eval_value(ctx, warnings)?;
        num(v, "numeric result")
    }

    fn eval_value<'a>(
        &'a self,
        ctx: &'a dyn Bindings,
        w: &mut Warnings,
    ) -> Result<ValueRef<'a>, EvalError> {
        Ok(match self {
            Expr::Number(n) => ValueRef::Num(*n),
            Expr::Str(s) => ValueRef::Text(s),
            Expr::Column(c) => ctx
                .lookup(c)
                .ok_or_else(|| EvalError::UnboundColumn(c.clone()))?,
            Expr::Unary(op, inner) => {
                let x = num(inner.eval_value(ctx, w)?, "unary operator")?;
                ValueRef::Num(match op {
                    UnaryOp::Neg => -x,
                    UnaryOp::Not => truth(x == 0.0),
                })
            }
            Expr::Binary(op, lhs, rhs) => {
                let l = lhs.eval_value(ctx, w)?;
                let r = rhs.eval_value(ctx, w)?;
                ValueRef::Num(binary(*op, l, r, w)?)
            }
            Expr::Call(call) => {
                if call.func == Func::Matches {
                    let subject = call.args[0].eval_value(ctx, w)?;
                    let ValueRef::Text(text) = subject else {
                        return Err(EvalError::TypeMismatch("`matches` on a number".into()));
                    };
                    let pattern = call.pattern().expect("matches carries a compiled pattern");
                    return Ok(ValueRef::Num(truth(pattern.is_match(text))));
                }
                let mut args = [0.0; 3];
                for (slot, a) in args.iter_mut().zip(&call.args) {
                    *slot = num(a.eval_value(ctx, w)?, call.func.name())?;
                }
                ValueRef::Num(match call.func {
                    Func::Log => {
                        if args[0] > 0.0 {
                            args[0].ln()
                        } else {
                            w.log_domain += 1;
                            0.0
                        }
                    }
                    Func::Abs => args[0].abs(),
                    Func::Min => args[0].min(args[1]),
                    Func::Max => args[0].max(args[1]),
                    Func::Clip => args[0].max(args[1]).min(args[2]),
                    Func::Matches => unreachable!(),
                })
            }
        })
    }
}

fn binary(op: BinaryOp, l: ValueRef<'_>, r: ValueRef<'_>, w: &mut Warnings) -> Result<f64, EvalError> {
    if let (ValueRef::Text(a), ValueRef::Text(b)) = (l, r) {
        return match op {
            BinaryOp::Eq => Ok(truth(a == b)),
            BinaryOp::Ne => Ok(truth(a != b)),
            _ => Err(EvalError::TypeMismatch(format!("`{}` on text values", op.symbol()))),
        };
    }
    let a = num(l, op.symbol())?;
    let b = num(r, op.symbol())?;
    Ok(match op {
        BinaryOp::Add => a + b,
        BinaryOp::Sub => a - b,
        BinaryOp::Mul => a * b,
        BinaryOp::Div => {
            if b == 0.0 {
                w.division_by_zero += 1;
                0.0
            } else {
                a / b
            }
        }
        BinaryOp::Eq => truth(a == b),
        BinaryOp::Ne => truth(a != b),
        BinaryOp::Lt => truth(a < b),
        BinaryOp::Le => truth(a <= b),
        BinaryOp::Gt => truth(a > b),
        BinaryOp::Ge => truth(a >= b),
        BinaryOp::And => truth(a != 0.0 && b != 0.0),
        BinaryOp::Or => truth(a != 0.0 || b != 0.0),
    })
}
