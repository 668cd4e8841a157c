//! The live session: one writer applies mutations and recomputes, readers
//! see the last committed state.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use indexmap::IndexMap;
use parking_lot::{Mutex, RwLock};
use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::{ColumnRole, DatasetTable};
use crate::expr::{Expr, Value, Warnings};
use crate::metrics::{
    slice_mask, table_from_rankings, top_moved_slices_for, Cell, MetricError, MetricTable, SliceDelta,
    SliceSpec, ALL_SLICE,
};
use crate::ranker::{attribute, combine, compare_rankings, rank, score_items, Attribution, RankDiff, Ranking};

use super::events::{Action, Payload, SessionEvent, TelemetryDir};
use super::workspace::{Mutation, Snapshot, Workspace, WorkspaceError};

/// Everything a reader needs, consistent at one revision.
#[derive(Debug)]
pub struct State {
    pub workspace: Workspace,
    pub table: MetricTable,
    /// Degenerate evaluations (division by zero, log domain) while scoring.
    pub warnings: Warnings,
    rankings: IndexMap<String, (String, Arc<Vec<Ranking>>)>,
    masks: IndexMap<String, (String, Arc<Vec<bool>>)>,
}

impl State {
    pub fn revision(&self) -> u64 {
        self.workspace.revision()
    }

    pub fn rankings(&self, model: &str) -> Option<&[Ranking]> {
        self.rankings.get(model).map(|(_, r)| r.as_slice())
    }

    pub fn slice_mask(&self, slice: &str) -> Option<&[bool]> {
        self.masks.get(slice).map(|(_, m)| m.as_slice())
    }
}

/// Raw objective values per group and item, keyed by objective name.
#[derive(Default)]
struct ScoreCache {
    columns: HashMap<String, (Expr, Arc<Vec<Vec<f64>>>, Warnings)>,
}

impl ScoreCache {
    fn ensure(&mut self, name: &str, expr: &Expr, dataset: &DatasetTable) -> Result<(), WorkspaceError> {
        if self.columns.get(name).is_some_and(|(e, _, _)| e == expr) {
            return Ok(());
        }
        let per_group: Vec<(Vec<f64>, Warnings)> = dataset
            .groups()
            .par_iter()
            .map(|g| {
                let mut w = Warnings::default();
                let values = g
                    .items
                    .iter()
                    .map(|item| expr.eval(&dataset.row(g, item), &mut w))
                    .collect::<Result<Vec<f64>, _>>()
                    .map_err(|source| MetricError::Eval { what: format!("objective `{name}`"), source })?;
                Ok((values, w))
            })
            .collect::<Result<_, WorkspaceError>>()?;
        let mut warnings = Warnings::default();
        let values = per_group
            .into_iter()
            .map(|(v, w)| {
                warnings.merge(w);
                v
            })
            .collect();
        self.columns.insert(name.to_string(), (expr.clone(), Arc::new(values), warnings));
        Ok(())
    }
}

/// Recomputes rankings and the metric table, reusing per-model rankings
/// whose trade-off key is unchanged and slice masks whose predicate is
/// unchanged.
fn compute(workspace: Workspace, prev: Option<&State>, cache: &mut ScoreCache) -> Result<State, WorkspaceError> {
    let dataset = workspace.dataset().clone();
    let mut warnings = Warnings::default();
    let mut rankings = IndexMap::new();
    for (name, model) in workspace.models() {
        let key = workspace.tradeoff_key(name).expect("model exists");
        for t in model.terms() {
            let o = &workspace.objectives()[&t.objective];
            cache.ensure(&t.objective, &o.expr, &dataset)?;
        }
        for t in model.terms() {
            warnings.merge(cache.columns[&t.objective].2);
        }
        let reused = prev.and_then(|p| p.rankings.get(name)).filter(|(k, _)| *k == key).map(|(_, r)| r.clone());
        let ranked = match reused {
            Some(r) => r,
            None => {
                let columns: Vec<&Arc<Vec<Vec<f64>>>> =
                    model.terms().iter().map(|t| &cache.columns[&t.objective].1).collect();
                let r: Vec<Ranking> = dataset
                    .groups()
                    .par_iter()
                    .enumerate()
                    .map(|(gi, g)| {
                        let scored: Vec<_> = g
                            .items
                            .iter()
                            .enumerate()
                            .map(|(p, item)| {
                                let raws: Vec<f64> = columns.iter().map(|c| c[gi][p]).collect();
                                combine(model, item.item_id.clone(), p, &raws)
                            })
                            .collect();
                        rank(g.query_id.clone(), &scored)
                    })
                    .collect();
                Arc::new(r)
            }
        };
        rankings.insert(name.clone(), (key, ranked));
    }
    cache.columns.retain(|name, _| workspace.objectives().contains_key(name));

    let slices: Vec<SliceSpec> =
        std::iter::once(SliceSpec::all()).chain(workspace.slices().values().cloned()).collect();
    let mut masks = IndexMap::new();
    for s in &slices {
        let key = s.predicate.to_string();
        let reused = prev.and_then(|p| p.masks.get(&s.name)).filter(|(k, _)| *k == key).map(|(_, m)| m.clone());
        let mask = match reused {
            Some(m) => m,
            None => Arc::new(slice_mask(s, &dataset)?),
        };
        masks.insert(s.name.clone(), (key, mask));
    }

    let model_rankings: Vec<(String, Vec<Ranking>)> =
        rankings.iter().map(|(n, (_, r))| (n.clone(), r.as_ref().clone())).collect();
    let mask_list: Vec<Vec<bool>> = masks.values().map(|(_, m)| m.as_ref().clone()).collect();
    let metrics: Vec<_> = workspace.metrics().values().cloned().collect();
    let table = table_from_rankings(&model_rankings, workspace.baseline(), &metrics, &slices, &mask_list, &dataset)?;
    Ok(State { workspace, table, warnings, rankings, masks })
}

pub type Clock = Box<dyn Fn() -> u64 + Send + Sync>;

fn system_clock() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

#[derive(Default)]
pub struct ServiceOptions {
    pub telemetry: Option<TelemetryDir>,
    /// Millisecond clock for event timestamps; defaults to the system clock.
    pub clock: Option<Clock>,
}

struct Journal {
    events: Vec<SessionEvent>,
    seqs: HashMap<String, u64>,
    /// Model most recently changed by a weight or term edit; the baseline
    /// until the first such change.
    active_model: String,
    cache: ScoreCache,
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error(transparent)]
    Workspace(#[from] WorkspaceError),
    #[error("telemetry write failed: {0}")]
    Telemetry(#[from] std::io::Error),
}

impl ServiceError {
    pub fn workspace(&self) -> Option<&WorkspaceError> {
        match self {
            ServiceError::Workspace(e) => Some(e),
            ServiceError::Telemetry(_) => None,
        }
    }
}

/// Result of a committed mutation batch.
#[derive(Debug, Clone)]
pub struct Committed {
    pub events: Vec<SessionEvent>,
    pub state: Arc<State>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ItemView {
    pub rank: usize,
    pub item_id: Arc<str>,
    pub score: f64,
    pub features: IndexMap<String, Value>,
    pub attribution: Attribution,
}

#[derive(Debug, Clone, Serialize)]
pub struct RankedView {
    pub model: String,
    pub items: Vec<ItemView>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SideBySide {
    pub revision: u64,
    pub query_id: String,
    pub query: IndexMap<String, Value>,
    pub a: RankedView,
    pub b: RankedView,
    pub diff: RankDiff,
}

#[derive(Debug, Clone, Serialize)]
pub struct SliceView {
    pub revision: u64,
    pub name: String,
    pub predicate: String,
    pub members: Vec<Arc<str>>,
    pub cells: Vec<Cell>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricView {
    pub revision: u64,
    pub name: String,
    pub cells: Vec<Cell>,
}

pub struct Service {
    state: RwLock<Arc<State>>,
    journal: Mutex<Journal>,
    telemetry: Option<TelemetryDir>,
    clock: Clock,
}

impl Service {
    pub fn new(workspace: Workspace, options: ServiceOptions) -> Result<Service, WorkspaceError> {
        let mut cache = ScoreCache::default();
        let active_model = workspace.baseline().to_string();
        let state = compute(workspace, None, &mut cache)?;
        Ok(Service {
            state: RwLock::new(Arc::new(state)),
            journal: Mutex::new(Journal { events: Vec::new(), seqs: HashMap::new(), active_model, cache }),
            telemetry: options.telemetry,
            clock: options.clock.unwrap_or_else(|| Box::new(system_clock)),
        })
    }

    /// The last committed state.
    pub fn state(&self) -> Arc<State> {
        self.state.read().clone()
    }

    /// Every event of this service instance, in commit order.
    pub fn events(&self) -> Vec<SessionEvent> {
        self.journal.lock().events.clone()
    }

    pub fn active_model(&self) -> String {
        self.journal.lock().active_model.clone()
    }

    fn record(&self, journal: &mut Journal, actor: &str, action: Action, payload: Payload) -> Result<SessionEvent, std::io::Error> {
        let seq = journal.seqs.get(actor).copied().unwrap_or(0) + 1;
        let event = SessionEvent { seq, timestamp: (self.clock)(), actor: actor.to_string(), action, payload };
        if let Some(t) = &self.telemetry {
            t.append(&event)?;
        }
        journal.seqs.insert(actor.to_string(), seq);
        journal.events.push(event.clone());
        Ok(event)
    }

    pub fn mutate(&self, actor: &str, mutation: Mutation) -> Result<Committed, ServiceError> {
        self.mutate_all(actor, vec![mutation])
    }

    /// Applies the mutations in order as one atomic commit: all validate or
    /// none apply. Each emits one event and bumps the revision once.
    pub fn mutate_all(&self, actor: &str, mutations: Vec<Mutation>) -> Result<Committed, ServiceError> {
        let mut journal = self.journal.lock();
        let prev = self.state();
        let mut workspace = prev.workspace.clone();
        let mut active = journal.active_model.clone();
        let mut payloads = Vec::with_capacity(mutations.len());
        for m in &mutations {
            let before = workspace.tradeoff_key(&active);
            let applied = workspace.apply(m)?;
            if let Some(model) = m.model() {
                active = model.to_string();
            }
            let mut p = Payload::for_mutation(m, &applied);
            p.revision = Some(workspace.revision());
            p.tradeoff = workspace.tradeoff_key(&active);
            if SessionEvent::action_of(m).is_mutation() {
                p.tradeoff_before = before;
            }
            payloads.push((SessionEvent::action_of(m), p));
        }
        let state = Arc::new(compute(workspace, Some(&prev), &mut journal.cache)?);
        let mut events = Vec::with_capacity(payloads.len());
        for (action, p) in payloads {
            events.push(self.record(&mut journal, actor, action, p)?);
        }
        journal.active_model = active;
        *self.state.write() = state.clone();
        Ok(Committed { events, state })
    }

    /// Creates or replaces a model from `objective: weight` pairs.
    pub fn put_model(&self, actor: &str, name: &str, weights: &IndexMap<String, f64>) -> Result<Committed, ServiceError> {
        let plan = self.state().workspace.plan_model(name, weights)?;
        self.mutate_all(actor, plan)
    }

    fn view_event(&self, actor: &str, action: Action, mut payload: Payload) -> Result<Arc<State>, ServiceError> {
        let mut journal = self.journal.lock();
        let state = self.state();
        payload.revision = Some(state.revision());
        payload.tradeoff = state.workspace.tradeoff_key(&journal.active_model);
        self.record(&mut journal, actor, action, payload)?;
        Ok(state)
    }

    /// The metric table, logged as a `table.view` scoped to `slice` (ALL by default).
    pub fn view_table(&self, actor: &str, slice: Option<&str>) -> Result<Arc<State>, ServiceError> {
        let slice = slice.unwrap_or(ALL_SLICE);
        if slice != ALL_SLICE && !self.state().workspace.slices().contains_key(slice) {
            return Err(unknown("slice", slice));
        }
        self.view_event(actor, Action::TableView, Payload { slice: Some(slice.to_string()), ..Payload::default() })
    }

    pub fn view_metric(&self, actor: &str, name: &str, slice: Option<&str>) -> Result<MetricView, ServiceError> {
        let state = self.state();
        if !state.workspace.metrics().contains_key(name) {
            return Err(unknown("metric", name));
        }
        if let Some(s) = slice {
            if s != ALL_SLICE && !state.workspace.slices().contains_key(s) {
                return Err(unknown("slice", s));
            }
        }
        let payload = Payload {
            metric: Some(name.to_string()),
            slice: Some(slice.unwrap_or(ALL_SLICE).to_string()),
            ..Payload::default()
        };
        let state = self.view_event(actor, Action::MetricView, payload)?;
        let cells = state
            .table
            .cells
            .iter()
            .filter(|c| c.metric == name && slice.is_none_or(|s| c.slice == s))
            .cloned()
            .collect();
        Ok(MetricView { revision: state.revision(), name: name.to_string(), cells })
    }

    pub fn view_slice(&self, actor: &str, name: &str) -> Result<SliceView, ServiceError> {
        let spec = if name == ALL_SLICE {
            SliceSpec::all()
        } else {
            self.state().workspace.slices().get(name).cloned().ok_or_else(|| unknown("slice", name))?
        };
        let state =
            self.view_event(actor, Action::SliceView, Payload { slice: Some(name.to_string()), ..Payload::default() })?;
        let mask = state.slice_mask(name).expect("mask per slice");
        let members = state
            .workspace
            .dataset()
            .groups()
            .iter()
            .zip(mask)
            .filter(|(_, m)| **m)
            .map(|(g, _)| g.query_id.clone())
            .collect();
        let cells = state.table.cells.iter().filter(|c| c.slice == name).cloned().collect();
        Ok(SliceView { revision: state.revision(), name: name.to_string(), predicate: spec.predicate.to_string(), members, cells })
    }

    /// Both rankings of one query with movements, the requested feature
    /// columns (all item features when empty) and per-item attribution.
    pub fn side_by_side(
        &self,
        actor: &str,
        query_id: &str,
        model_a: &str,
        model_b: &str,
        columns: &[String],
    ) -> Result<SideBySide, ServiceError> {
        let state = self.state();
        let ws = &state.workspace;
        let dataset = ws.dataset();
        let gi = dataset.group_index(query_id).ok_or_else(|| WorkspaceError::UnknownQuery(query_id.to_string()))?;
        let (a, b) = (ws.model(model_a)?, ws.model(model_b)?);
        let schema = dataset.schema();
        let columns: Vec<String> = if columns.is_empty() {
            schema.columns().iter().filter(|c| c.role == ColumnRole::ItemFeature).map(|c| c.name.clone()).collect()
        } else {
            for c in columns {
                if schema.column(c).is_none() {
                    return Err(unknown("column", c));
                }
            }
            columns.to_vec()
        };
        let group = &dataset.groups()[gi];
        let query = schema
            .columns()
            .iter()
            .filter(|c| c.role == ColumnRole::QueryFeature)
            .filter_map(|c| group_value(dataset, gi, &c.name).map(|v| (c.name.clone(), v)))
            .collect();
        let view = |model: &crate::ranker::ModelSpec| -> Result<(Ranking, RankedView), WorkspaceError> {
            let scored = score_items(model, ws.objectives(), schema, group).map_err(MetricError::from)?;
            let ranking = rank(group.query_id.clone(), &scored);
            let items = ranking
                .items
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    let row = dataset.row(group, &group.items[r.position]);
                    ItemView {
                        rank: i + 1,
                        item_id: r.item_id.clone(),
                        score: r.score,
                        features: columns
                            .iter()
                            .filter_map(|c| value_of(&row, c).map(|v| (c.clone(), v)))
                            .collect(),
                        attribution: attribute(&scored[r.position]),
                    }
                })
                .collect();
            Ok((ranking, RankedView { model: model.name.clone(), items }))
        };
        let (ra, va) = view(a)?;
        let (rb, vb) = view(b)?;
        let diff = compare_rankings(&ra, &rb).map_err(MetricError::from).map_err(WorkspaceError::from)?;
        let payload = Payload {
            query_id: Some(query_id.to_string()),
            model_a: Some(model_a.to_string()),
            model_b: Some(model_b.to_string()),
            ..Payload::default()
        };
        self.view_event(actor, Action::ExampleView, payload)?;
        Ok(SideBySide { revision: state.revision(), query_id: query_id.to_string(), query, a: va, b: vb, diff })
    }

    /// Slices by |delta| for `model` (the active model when omitted; the
    /// first non-baseline model if the active one is the baseline).
    pub fn top_moved(&self, metric: &str, model: Option<&str>, limit: usize) -> Result<Vec<SliceDelta>, ServiceError> {
        let state = self.state();
        let model = match model {
            Some(m) => m.to_string(),
            None => {
                let active = self.active_model();
                if active != state.table.baseline {
                    active
                } else {
                    match state.table.candidate() {
                        Some(c) => c.to_string(),
                        None => active,
                    }
                }
            }
        };
        top_moved_slices_for(&state.table, &model, metric, limit)
            .map_err(|e| ServiceError::Workspace(WorkspaceError::Metric(e)))
    }

    pub fn export_snapshot(&self) -> Snapshot {
        self.state().workspace.export_snapshot()
    }
}

fn unknown(kind: &'static str, name: &str) -> ServiceError {
    WorkspaceError::UnknownEntity { kind, name: name.to_string() }.into()
}

fn value_of(row: &impl crate::expr::Bindings, column: &str) -> Option<Value> {
    row.lookup(column).map(|v| match v {
        crate::expr::ValueRef::Num(n) => Value::Num(n),
        crate::expr::ValueRef::Text(t) => Value::from(t),
    })
}

fn group_value(dataset: &DatasetTable, gi: usize, column: &str) -> Option<Value> {
    value_of(&dataset.query_view(&dataset.groups()[gi]), column)
}

/// Applies every design and definition event of `events` to `initial`.
pub fn replay(initial: Workspace, events: &[SessionEvent]) -> Result<Workspace, String> {
    let mut ws = initial;
    for e in events {
        if let Some(m) = e.mutation()? {
            ws.apply(&m).map_err(|err| format!("event {} ({}): {err}", e.seq, e.action))?;
        }
    }
    Ok(ws)
}

/// Replays `events` and recomputes from scratch.
pub fn replay_state(initial: Workspace, events: &[SessionEvent]) -> Result<State, String> {
    let ws = replay(initial, events)?;
    compute(ws, None, &mut ScoreCache::default()).map_err(|e| e.to_string())
}
