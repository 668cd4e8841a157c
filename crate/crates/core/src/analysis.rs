//! Activity taxonomy over session telemetry and the per-session measures
//! M1 to M5.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::metrics::ALL_SLICE;
use crate::service::{Action, LogError, SessionEvent};

/// Trade-off key used for evaluations before any design action when the
/// log does not record one.
pub const INITIAL_TRADEOFF: &str = "initial";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Design,
    Evaluation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignStep {
    Small,
    Big,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    Example,
    Metric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalScope {
    Standard,
    Additional,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActivityRecord {
    pub seq: u64,
    pub actor: String,
    pub action: Action,
    pub category: Category,
    pub design_step: Option<DesignStep>,
    pub eval_mode: Option<EvalMode>,
    pub eval_scope: Option<EvalScope>,
    /// What an evaluation looked at; repeats under one trade-off dedupe.
    pub target: Option<String>,
    /// Trade-off in force after the event.
    pub tradeoff_key: String,
    /// For design records: whether the trade-off key changed.
    pub changed_tradeoff: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionMetrics {
    pub m1_distinct_tradeoffs: usize,
    pub m2_distinct_bigstep: usize,
    pub m3_evals_per_tradeoff: f64,
    pub m4_additional_evals: usize,
    pub m5_balance_kl: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("session log has no events")]
    EmptySession,
    #[error(transparent)]
    Log(#[from] LogError),
}

/// Running state needed to classify the next event.
#[derive(Debug, Clone)]
pub struct SessionContext {
    anecdotes: HashSet<String>,
    session_metrics: HashSet<String>,
    tradeoff: String,
}

impl SessionContext {
    pub fn new(anecdotes: &[String]) -> SessionContext {
        SessionContext {
            anecdotes: anecdotes.iter().cloned().collect(),
            session_metrics: HashSet::new(),
            tradeoff: INITIAL_TRADEOFF.to_string(),
        }
    }

    pub fn tradeoff(&self) -> &str {
        &self.tradeoff
    }

    /// Classifies `event` and advances the context past it.
    pub fn classify(&mut self, event: &SessionEvent) -> ActivityRecord {
        let p = &event.payload;
        let design = match event.action {
            Action::WeightChange => Some(DesignStep::Small),
            Action::ObjectiveAdd
            | Action::ObjectiveEdit
            | Action::ObjectiveRemove
            | Action::TermAdd
            | Action::TermRemove => Some(DesignStep::Big),
            _ => None,
        };
        let mut record = ActivityRecord {
            seq: event.seq,
            actor: event.actor.clone(),
            action: event.action,
            category: Category::Evaluation,
            design_step: None,
            eval_mode: None,
            eval_scope: None,
            target: None,
            tradeoff_key: String::new(),
            changed_tradeoff: false,
        };
        if let Some(step) = design {
            let before = p.tradeoff_before.clone().unwrap_or_else(|| self.tradeoff.clone());
            let after = p
                .tradeoff
                .clone()
                .unwrap_or_else(|| format!("design@{}#{}", event.actor, event.seq));
            record.category = Category::Design;
            record.design_step = Some(step);
            record.changed_tradeoff = after != before;
            record.tradeoff_key = after.clone();
            self.tradeoff = after;
            return record;
        }

        if let Some(t) = &p.tradeoff {
            self.tradeoff = t.clone();
        }
        record.tradeoff_key = self.tradeoff.clone();
        let slice = p.slice.as_deref().unwrap_or(ALL_SLICE);
        let name = p.name.as_deref().unwrap_or("");
        let (mode, scope, target) = match event.action {
            Action::ExampleView => {
                let q = p.query_id.as_deref().unwrap_or("");
                let scope = if self.anecdotes.contains(q) { EvalScope::Standard } else { EvalScope::Additional };
                (EvalMode::Example, scope, format!("example:{q}"))
            }
            Action::TableView => {
                let scope = if slice == ALL_SLICE { EvalScope::Standard } else { EvalScope::Additional };
                (EvalMode::Metric, scope, format!("table:{slice}"))
            }
            Action::MetricView => {
                let metric = p.metric.as_deref().unwrap_or(name);
                let standard = slice == ALL_SLICE && !self.session_metrics.contains(metric);
                let scope = if standard { EvalScope::Standard } else { EvalScope::Additional };
                (EvalMode::Metric, scope, format!("metric:{metric}@{slice}"))
            }
            Action::SliceView => (EvalMode::Metric, EvalScope::Additional, format!("slice:{slice}")),
            Action::MetricDefine => {
                self.session_metrics.insert(name.to_string());
                (EvalMode::Metric, EvalScope::Additional, format!("metric.define:{name}"))
            }
            Action::SliceDefine => (EvalMode::Metric, EvalScope::Additional, format!("slice.define:{name}")),
            _ => unreachable!("design actions handled above"),
        };
        record.eval_mode = Some(mode);
        record.eval_scope = Some(scope);
        record.target = Some(target);
        record
    }
}

/// Classifies every event of a seq-ordered log.
pub fn classify_log(log: &[SessionEvent], anecdotes: &[String]) -> Vec<ActivityRecord> {
    let mut ctx = SessionContext::new(anecdotes);
    log.iter().map(|e| ctx.classify(e)).collect()
}

/// `Q(e)·ln(Q(e)/0.5) + Q(m)·ln(Q(m)/0.5)`, with `0·ln 0 = 0`; zero when
/// there are no evaluations.
pub fn balance_kl(examples: usize, metrics: usize) -> f64 {
    let total = (examples + metrics) as f64;
    if total == 0.0 {
        return 0.0;
    }
    [examples, metrics]
        .into_iter()
        .map(|n| n as f64 / total)
        .filter(|q| *q > 0.0)
        .map(|q| q * (q / 0.5).ln())
        .sum()
}

/// M1 to M5 from classified records.
pub fn measures(records: &[ActivityRecord]) -> SessionMetrics {
    let mut seen = HashSet::new();
    let mut distinct: Vec<&ActivityRecord> = Vec::new();
    for r in records.iter().filter(|r| r.category == Category::Evaluation) {
        if seen.insert((r.target.clone(), r.tradeoff_key.clone())) {
            distinct.push(r);
        }
    }
    let evaluated: HashSet<&str> = distinct.iter().map(|r| r.tradeoff_key.as_str()).collect();
    let big: HashSet<&str> = records
        .iter()
        .filter(|r| r.design_step == Some(DesignStep::Big) && r.changed_tradeoff)
        .map(|r| r.tradeoff_key.as_str())
        .collect();
    let m1 = evaluated.len();
    let examples = distinct.iter().filter(|r| r.eval_mode == Some(EvalMode::Example)).count();
    SessionMetrics {
        m1_distinct_tradeoffs: m1,
        m2_distinct_bigstep: big.intersection(&evaluated).count(),
        m3_evals_per_tradeoff: if m1 == 0 { 0.0 } else { distinct.len() as f64 / m1 as f64 },
        m4_additional_evals: distinct.iter().filter(|r| r.eval_scope == Some(EvalScope::Additional)).count(),
        m5_balance_kl: balance_kl(examples, distinct.len() - examples),
    }
}

pub fn session_metrics(log: &[SessionEvent], anecdotes: &[String]) -> Result<SessionMetrics, AnalysisError> {
    if log.is_empty() {
        return Err(AnalysisError::EmptySession);
    }
    Ok(measures(&classify_log(log, anecdotes)))
}

/// Per-event classification table (the activity strip).
pub fn records_to_csv(records: &[ActivityRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "seq",
        "actor",
        "action",
        "category",
        "design_step",
        "eval_mode",
        "eval_scope",
        "target",
        "tradeoff_key",
    ])
    .expect("in-memory write");
    let label = |v: Option<String>| v.unwrap_or_default();
    let name = |v: serde_json::Value| v.as_str().map(str::to_string);
    for r in records {
        w.write_record([
            r.seq.to_string(),
            r.actor.clone(),
            r.action.name().to_string(),
            label(name(serde_json::to_value(r.category).expect("enum"))),
            label(r.design_step.and_then(|s| name(serde_json::to_value(s).expect("enum")))),
            label(r.eval_mode.and_then(|s| name(serde_json::to_value(s).expect("enum")))),
            label(r.eval_scope.and_then(|s| name(serde_json::to_value(s).expect("enum")))),
            label(r.target.clone()),
            r.tradeoff_key.clone(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}
