//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

pub mod session;

use std::path::PathBuf;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use proptest::prelude::*;

use tradeoff_core::expr::{BinaryOp, Call, EvalContext, Expr, Func, UnaryOp};
use tradeoff_core::service::{Mutation, Workspace, WorkspaceConfig};

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn fixture_config() -> WorkspaceConfig {
    WorkspaceConfig::load(&fixtures_dir().join("workspace.toml")).expect("shipped config loads")
}

pub fn fixture_workspace() -> Workspace {
    let config = fixture_config();
    let dataset = Arc::new(config.load_dataset().expect("shipped dataset loads"));
    Workspace::from_config(&config, dataset).expect("shipped workspace is valid")
}

pub fn raise_exact_purchase() -> Mutation {
    Mutation::SetWeight { model: "candidate".into(), objective: "exact_purchase".into(), weight: 1.5 }
}

// ---------------------------------------------------------------- NDCG

/// Textbook NDCG@k: gains below zero count as zero; the ideal ordering is
/// found by repeatedly taking the largest remaining gain.
pub fn ndcg_oracle(gains: &[f64], k: usize) -> f64 {
    let g: Vec<f64> = gains.iter().map(|&x| if x > 0.0 { x } else { 0.0 }).collect();
    let depth = k.min(g.len());
    let disc = |rank: usize| std::f64::consts::LN_2 / ((rank + 1) as f64).ln();
    let dcg: f64 = (0..depth).map(|i| g[i] * disc(i + 1)).sum();
    let mut rest = g.clone();
    let mut idcg = 0.0;
    for rank in 1..=depth {
        let (best, _) = rest
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        idcg += rest.remove(best) * disc(rank);
    }
    if idcg == 0.0 {
        1.0
    } else {
        dcg / idcg
    }
}

pub fn random_gains(rng: &mut ChaCha8Rng) -> (Vec<f64>, usize) {
    let n = rng.random_range(0..=16);
    let gains = (0..n)
        .map(|_| match rng.random_range(0..4) {
            0 => 0.0,
            1 => rng.random_range(0..4) as f64,
            2 => rng.random_range(-0.5..1.0),
            _ => rng.random_range(0.0..10.0),
        })
        .collect();
    (gains, rng.random_range(1..=8))
}

// ------------------------------------------------- expression derivations

/// A derivation in the expression grammar, built level by level so its
/// shape fixes the intended grouping independently of the engine.
#[derive(Debug, Clone)]
pub enum Deriv {
    Num(f64),
    Col(&'static str),
    Neg(Box<Deriv>),
    Not(Box<Deriv>),
    Paren(Box<Deriv>),
    /// Left-associative chain `first (op next)*` at one precedence level.
    Chain(Box<Deriv>, Vec<(&'static str, Deriv)>),
    /// Non-chaining comparison.
    Cmp(Box<Deriv>, &'static str, Box<Deriv>),
}

pub const COLUMNS: [&str; 4] = ["x", "y", "z", "flag"];

pub fn bindings(rng: &mut ChaCha8Rng) -> EvalContext {
    let mut ctx = EvalContext::new();
    for c in ["x", "y", "z"] {
        let v = match rng.random_range(0..3) {
            0 => rng.random_range(0..4) as f64,
            1 => 0.0,
            _ => rng.random_range(-5.0..5.0),
        };
        ctx.insert(c, v);
    }
    ctx.insert("flag", if rng.random_bool(0.5) { 1.0 } else { 0.0 });
    ctx
}

fn gen_level(rng: &mut ChaCha8Rng, level: u8, depth: u8) -> Deriv {
    // levels: 0 or, 1 and, 2 cmp, 3 add, 4 mul, 5 unary, 6 primary
    match level {
        0 | 1 | 3 | 4 => {
            let ops: &[&'static str] = match level {
                0 => &["or"],
                1 => &["and"],
                3 => &["+", "-"],
                _ => &["*", "/"],
            };
            let first = gen_level(rng, level + 1, depth);
            let n = if depth == 0 { 0 } else { rng.random_range(0..3) };
            let rest = (0..n)
                .map(|_| (ops[rng.random_range(0..ops.len())], gen_level(rng, level + 1, depth)))
                .collect::<Vec<_>>();
            if rest.is_empty() {
                first
            } else {
                Deriv::Chain(Box::new(first), rest)
            }
        }
        2 => {
            let l = gen_level(rng, 3, depth);
            if depth > 0 && rng.random_bool(0.4) {
                let op = ["==", "!=", "<", "<=", ">", ">="][rng.random_range(0..6)];
                Deriv::Cmp(Box::new(l), op, Box::new(gen_level(rng, 3, depth)))
            } else {
                l
            }
        }
        5 => match rng.random_range(0..8) {
            0 => Deriv::Neg(Box::new(gen_level(rng, 5, depth))),
            1 => Deriv::Not(Box::new(gen_level(rng, 5, depth))),
            _ => gen_level(rng, 6, depth),
        },
        _ => {
            if depth > 0 && rng.random_bool(0.25) {
                Deriv::Paren(Box::new(gen_level(rng, 0, depth - 1)))
            } else if rng.random_bool(0.5) {
                Deriv::Col(COLUMNS[rng.random_range(0..COLUMNS.len())])
            } else {
                Deriv::Num(match rng.random_range(0..3) {
                    0 => rng.random_range(0..4) as f64,
                    1 => rng.random_range(0..100) as f64 / 8.0,
                    _ => 2.5,
                })
            }
        }
    }
}

pub fn random_deriv(rng: &mut ChaCha8Rng) -> Deriv {
    gen_level(rng, 0, 3)
}

/// Source text with only the parentheses the derivation carries.
pub fn render_flat(d: &Deriv) -> String {
    match d {
        Deriv::Num(n) => format!("{n}"),
        Deriv::Col(c) => c.to_string(),
        Deriv::Neg(e) => format!("-{}", render_flat(e)),
        Deriv::Not(e) => format!("not {}", render_flat(e)),
        Deriv::Paren(e) => format!("({})", render_flat(e)),
        Deriv::Chain(first, rest) => {
            let mut s = render_flat(first);
            for (op, e) in rest {
                s.push_str(&format!(" {op} {}", render_flat(e)));
            }
            s
        }
        Deriv::Cmp(l, op, r) => format!("{} {op} {}", render_flat(l), render_flat(r)),
    }
}

/// Source text with every compound subexpression parenthesized.
pub fn render_full(d: &Deriv) -> String {
    match d {
        Deriv::Num(n) => format!("{n}"),
        Deriv::Col(c) => c.to_string(),
        Deriv::Neg(e) => format!("(-{})", render_full(e)),
        Deriv::Not(e) => format!("(not {})", render_full(e)),
        Deriv::Paren(e) => render_full(e),
        Deriv::Chain(first, rest) => {
            let mut s = render_full(first);
            for (op, e) in rest {
                s = format!("({s} {op} {})", render_full(e));
            }
            s
        }
        Deriv::Cmp(l, op, r) => format!("({} {op} {})", render_full(l), render_full(r)),
    }
}

fn truth(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Reference evaluator over the derivation; mirrors the documented
/// semantics (x/0 = 0, booleans as 0/1, and/or on nonzero).
pub fn eval_deriv(d: &Deriv, ctx: &dyn Fn(&str) -> f64) -> f64 {
    match d {
        Deriv::Num(n) => *n,
        Deriv::Col(c) => ctx(c),
        Deriv::Neg(e) => -eval_deriv(e, ctx),
        Deriv::Not(e) => truth(eval_deriv(e, ctx) == 0.0),
        Deriv::Paren(e) => eval_deriv(e, ctx),
        Deriv::Chain(first, rest) => {
            let mut acc = eval_deriv(first, ctx);
            for (op, e) in rest {
                let v = eval_deriv(e, ctx);
                acc = match *op {
                    "+" => acc + v,
                    "-" => acc - v,
                    "*" => acc * v,
                    "/" => {
                        if v == 0.0 {
                            0.0
                        } else {
                            acc / v
                        }
                    }
                    "and" => truth(acc != 0.0 && v != 0.0),
                    "or" => truth(acc != 0.0 || v != 0.0),
                    other => unreachable!("{other}"),
                };
            }
            acc
        }
        Deriv::Cmp(l, op, r) => {
            let (a, b) = (eval_deriv(l, ctx), eval_deriv(r, ctx));
            truth(match *op {
                "==" => a == b,
                "!=" => a != b,
                "<" => a < b,
                "<=" => a <= b,
                ">" => a > b,
                _ => a >= b,
            })
        }
    }
}

// ------------------------------------------------------- AST strategy

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (0u32..1000).prop_map(|n| Expr::Number(n as f64)),
        (0.0f64..1e6).prop_map(Expr::Number),
        prop::sample::select(vec!["x", "click_probability", "esci_label", "_a1"]).prop_map(Expr::column),
    ]
}

/// Arbitrary parser-shaped ASTs.
pub fn arb_expr() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(5, 48, 3, |inner| {
        let ops = vec![
            BinaryOp::Add,
            BinaryOp::Sub,
            BinaryOp::Mul,
            BinaryOp::Div,
            BinaryOp::Eq,
            BinaryOp::Ne,
            BinaryOp::Lt,
            BinaryOp::Le,
            BinaryOp::Gt,
            BinaryOp::Ge,
            BinaryOp::And,
            BinaryOp::Or,
        ];
        prop_oneof![
            (prop::sample::select(ops), inner.clone(), inner.clone()).prop_map(|(op, l, r)| Expr::binary(op, l, r)),
            (prop::bool::ANY, inner.clone())
                .prop_map(|(neg, e)| Expr::unary(if neg { UnaryOp::Neg } else { UnaryOp::Not }, e)),
            (prop::sample::select(vec![Func::Log, Func::Abs]), inner.clone())
                .prop_map(|(f, a)| Expr::Call(Call::new(f, vec![a]).unwrap())),
            (prop::sample::select(vec![Func::Min, Func::Max]), inner.clone(), inner.clone())
                .prop_map(|(f, a, b)| Expr::Call(Call::new(f, vec![a, b]).unwrap())),
            (inner.clone(), inner.clone(), inner.clone())
                .prop_map(|(a, b, c)| Expr::Call(Call::new(Func::Clip, vec![a, b, c]).unwrap())),
            (inner.clone(), "[a-z '\\\\\"]{0,6}")
                .prop_map(|(e, s)| Expr::binary(BinaryOp::Eq, e, Expr::string(s))),
            prop::sample::select(vec![r"[0-9]+\s*oz", "^uconn", r"it's", r"a\\b"]).prop_map(|p| {
                Expr::Call(Call::new(Func::Matches, vec![Expr::column("query_text"), Expr::string(p)]).unwrap())
            }),
        ]
    })
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
