//! The hand-scripted analysis session shared by the analysis tests and
//! the acceptance suite.

use std::sync::OnceLock;

use tradeoff_core::definition::{MetricDef, MetricKindDef, ObjectiveDef, SliceDef};
use tradeoff_core::service::{Mutation, Service, ServiceOptions, SessionEvent};

use super::fixture_workspace;

pub fn anecdotes() -> Vec<String> {
    vec!["q000".into(), "q001".into()]
}

fn objective(name: &str, expr: &str) -> ObjectiveDef {
    ObjectiveDef { name: name.into(), expr: expr.into(), description: String::new() }
}

fn weight(model: &str, objective: &str, weight: f64) -> Mutation {
    Mutation::SetWeight { model: model.into(), objective: objective.into(), weight }
}

/// Trade-off keys reached, in order: K0 (fixture weights, shared by both
/// models), K1 (exact 1.5), K2 (+rating term), K3 (rating edited), K4
/// (rating 0.75), back to K0, K5 (new explore model), K6 (explore click 2).
pub fn run_scripted_session(svc: &Service) {
    let m = |mutation| {
        svc.mutate("ana", mutation).unwrap();
    };
    let ex = |q: &str, b: &str| {
        svc.side_by_side("ana", q, "baseline", b, &[]).unwrap();
    };
    let table = |s: Option<&str>| {
        svc.view_table("ana", s).unwrap();
    };
    // K0
    table(None);
    ex("q000", "candidate");
    ex("q000", "candidate");
    m(weight("candidate", "exact_purchase", 1.5));
    // K1
    table(None);
    ex("q000", "candidate");
    table(Some("quantities"));
    ex("q005", "candidate");
    m(weight("candidate", "exact_purchase", 0.2));
    // K0 again
    table(None);
    m(Mutation::AddObjective(objective("rating", "review_rating / 5")));
    m(Mutation::AddTerm { model: "candidate".into(), objective: "rating".into(), weight: 0.5 });
    // K2
    table(None);
    ex("q001", "candidate");
    m(Mutation::DefineMetric(MetricDef {
        name: "mean_rating".into(),
        kind: MetricKindDef::Mean { expr: "review_rating".into(), k: 4 },
        description: String::new(),
    }));
    svc.view_metric("ana", "mean_rating", None).unwrap();
    svc.view_metric("ana", "ndcg_purchase_prob", None).unwrap();
    m(Mutation::EditObjective(objective("rating", "(review_rating >= 4.5) * purchase_probability")));
    // K3
    ex("q001", "candidate");
    m(Mutation::DefineSlice(SliceDef {
        name: "hoodies".into(),
        predicate: "matches(query_text, 'hoodie')".into(),
        description: String::new(),
    }));
    svc.view_slice("ana", "hoodies").unwrap();
    m(weight("candidate", "rating", 0.75));
    // K4
    table(Some("hoodies"));
    ex("q000", "candidate");
    ex("q000", "candidate");
    m(Mutation::RemoveTerm { model: "candidate".into(), objective: "rating".into() });
    // K0 again, via a big step
    table(None);
    m(Mutation::AddTerm { model: "explore".into(), objective: "click".into(), weight: 1.0 });
    // K5
    ex("q000", "explore");
    svc.view_metric("ana", "exact_density", Some("quantities")).unwrap();
    m(Mutation::AddObjective(objective("unused", "units_sold / 1000")));
    m(Mutation::RemoveObjective { name: "unused".into() });
    table(None);
    m(weight("explore", "click", 2.0));
    // K6, never evaluated
}

pub fn build_log() -> Vec<SessionEvent> {
    let svc = Service::new(fixture_workspace(), ServiceOptions::default()).unwrap();
    run_scripted_session(&svc);
    svc.events()
}

pub fn scripted_log() -> Vec<SessionEvent> {
    static LOG: OnceLock<Vec<SessionEvent>> = OnceLock::new();
    LOG.get_or_init(build_log).clone()
}

/// Independent evaluation of the balance divergence from the two counts.
pub fn kl_oracle(examples: f64, metrics: f64) -> f64 {
    let n = examples + metrics;
    let (qe, qm) = (examples / n, metrics / n);
    let term = |q: f64| if q == 0.0 { 0.0 } else { q * (2.0 * q).ln() };
    term(qe) + term(qm)
}

// Hand-computed measures for the scripted session.
// Distinct (target, trade-off) evaluations per key: K0 2, K1 4, K2 5, K3 3, K4 2, K5 3.
pub const EXPECTED_M1: usize = 6;
// Big steps that changed the key: K2, K3, K0 (term removal), K5.
pub const EXPECTED_M2: usize = 4;
pub const EXPECTED_M3: f64 = 19.0 / 6.0;
// K1: quantities table, q005; K2: metric define and view; K3: slice define
// and view; K4: hoodies table; K5: exact_density on quantities.
pub const EXPECTED_M4: usize = 8;
// 7 distinct example evaluations against 12 metric evaluations.
pub const EXPECTED_EXAMPLES: f64 = 7.0;
pub const EXPECTED_METRIC_EVALS: f64 = 12.0;
