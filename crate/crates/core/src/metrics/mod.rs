//! Metrics over rankings at query, slice and dataset level, and the
//! model × metric × slice table with deltas against a baseline model.

mod measures;

use std::cmp::Ordering;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

pub use measures::{cross_entropy, density_at_k, mean_at_k, ndcg_at_k, PROB_EPSILON};

use crate::dataset::{DatasetTable, QueryGroup};
use crate::expr::{BinaryOp, EvalError, Expr, Warnings};
use crate::ranker::{rank, score_items_counted, ModelSpec, Objectives, Ranking, RankerError};

/// Name of the implicit slice holding every query.
pub const ALL_SLICE: &str = "ALL";

#[derive(Debug, Clone, PartialEq)]
pub enum MetricKind {
    Ndcg { gain: Expr, k: usize },
    Density { predicate: Expr, k: usize },
    CrossEntropy { label: Expr, prob: Expr },
    Mean { expr: Expr, k: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricSpec {
    pub name: String,
    pub kind: MetricKind,
    pub description: String,
}

impl MetricSpec {
    pub fn new(name: &str, kind: MetricKind) -> Self {
        MetricSpec { name: name.to_string(), kind, description: String::new() }
    }

    pub fn exprs(&self) -> Vec<&Expr> {
        match &self.kind {
            MetricKind::Ndcg { gain: e, .. }
            | MetricKind::Density { predicate: e, .. }
            | MetricKind::Mean { expr: e, .. } => vec![e],
            MetricKind::CrossEntropy { label, prob } => vec![label, prob],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SliceSpec {
    pub name: String,
    pub predicate: Expr,
    pub description: String,
}

impl SliceSpec {
    pub fn new(name: &str, predicate: Expr) -> Self {
        SliceSpec { name: name.to_string(), predicate, description: String::new() }
    }

    /// The implicit every-query slice.
    pub fn all() -> Self {
        SliceSpec::new(ALL_SLICE, Expr::binary(BinaryOp::Eq, Expr::Number(1.0), Expr::Number(1.0)))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("labels and probabilities differ in length ({labels} vs {probs})")]
    LengthMismatch { labels: usize, probs: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("baseline model `{0}` is not in the table")]
    UnknownBaseline(String),
    #[error("unknown metric `{0}`")]
    UnknownMetric(String),
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error(transparent)]
    Ranker(#[from] RankerError),
    #[error("{what}: {source}")]
    Eval { what: String, source: EvalError },
}

/// Mean over member queries; `value` is None for an empty slice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricValue {
    pub value: Option<f64>,
    pub count: usize,
}

impl MetricValue {
    pub fn is_undefined(&self) -> bool {
        self.value.is_none()
    }
}

/// What metric evaluation reads besides the model: the data and the
/// objective definitions the model's terms refer to.
#[derive(Clone, Copy)]
pub struct EvalScope<'a> {
    pub dataset: &'a DatasetTable,
    pub objectives: &'a Objectives,
}

/// Membership mask over the dataset's query groups.
pub fn slice_mask(slice: &SliceSpec, dataset: &DatasetTable) -> Result<Vec<bool>, MetricError> {
    dataset
        .groups()
        .iter()
        .map(|g| {
            slice
                .predicate
                .eval(&dataset.query_view(g), &mut Warnings::default())
                .map(|v| v == 1.0)
                .map_err(|source| MetricError::Eval { what: format!("slice `{}`", slice.name), source })
        })
        .collect()
}

/// Query ids whose query-level features satisfy the slice predicate, in dataset order.
pub fn slice_members(slice: &SliceSpec, dataset: &DatasetTable) -> Result<Vec<Arc<str>>, MetricError> {
    let mask = slice_mask(slice, dataset)?;
    Ok(dataset
        .groups()
        .iter()
        .zip(mask)
        .filter(|(_, m)| *m)
        .map(|(g, _)| g.query_id.clone())
        .collect())
}

/// Rankings of every query group under `model`, in dataset order.
pub fn rank_all(model: &ModelSpec, scope: EvalScope<'_>) -> Result<(Vec<Ranking>, Warnings), MetricError> {
    let schema = scope.dataset.schema();
    let per_group: Vec<(Ranking, Warnings)> = scope
        .dataset
        .groups()
        .par_iter()
        .map(|g| {
            let mut w = Warnings::default();
            let scored = score_items_counted(model, scope.objectives, schema, g, &mut w)?;
            Ok((rank(g.query_id.clone(), &scored), w))
        })
        .collect::<Result<_, RankerError>>()?;
    let mut warnings = Warnings::default();
    let rankings = per_group
        .into_iter()
        .map(|(r, w)| {
            warnings.merge(w);
            r
        })
        .collect();
    Ok((rankings, warnings))
}

fn ranked_values(
    e: &Expr,
    dataset: &DatasetTable,
    group: &QueryGroup,
    ranking: &Ranking,
    what: &str,
) -> Result<Vec<f64>, MetricError> {
    let mut w = Warnings::default();
    ranking
        .positions()
        .map(|p| {
            e.eval(&dataset.row(group, &group.items[p]), &mut w)
                .map_err(|source| MetricError::Eval { what: what.to_string(), source })
        })
        .collect()
}

/// The metric on a single query's ranking.
pub fn query_value(
    metric: &MetricSpec,
    dataset: &DatasetTable,
    group: &QueryGroup,
    ranking: &Ranking,
) -> Result<f64, MetricError> {
    let what = format!("metric `{}`", metric.name);
    let values = |e: &Expr| ranked_values(e, dataset, group, ranking, &what);
    Ok(match &metric.kind {
        MetricKind::Ndcg { gain, k } => ndcg_at_k(&values(gain)?, *k),
        MetricKind::Density { predicate, k } => density_at_k(&values(predicate)?, *k),
        MetricKind::Mean { expr, k } => mean_at_k(&values(expr)?, *k),
        MetricKind::CrossEntropy { label, prob } => {
            let labels: Vec<f64> = values(label)?.into_iter().map(|v| if v != 0.0 { 1.0 } else { 0.0 }).collect();
            cross_entropy(&labels, &values(prob)?)?
        }
    })
}

/// Per-query metric values, aligned with `rankings`.
pub fn query_values(
    metric: &MetricSpec,
    dataset: &DatasetTable,
    rankings: &[Ranking],
) -> Result<Vec<f64>, MetricError> {
    dataset
        .groups()
        .par_iter()
        .zip(rankings.par_iter())
        .map(|(g, r)| query_value(metric, dataset, g, r))
        .collect()
}

/// Unweighted mean of the masked per-query values, summed in dataset order.
pub fn aggregate(values: &[f64], mask: &[bool]) -> MetricValue {
    let (sum, count) = values
        .iter()
        .zip(mask)
        .filter(|(_, m)| **m)
        .fold((0.0, 0usize), |(s, c), (v, _)| (s + v, c + 1));
    MetricValue { value: (count > 0).then(|| sum / count as f64), count }
}

pub fn evaluate_metric(
    metric: &MetricSpec,
    model: &ModelSpec,
    slice: &SliceSpec,
    scope: EvalScope<'_>,
) -> Result<MetricValue, MetricError> {
    let mask = slice_mask(slice, scope.dataset)?;
    let (rankings, _) = rank_all(model, scope)?;
    let values = query_values(metric, scope.dataset, &rankings)?;
    Ok(aggregate(&values, &mask))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub model: String,
    pub metric: String,
    pub slice: String,
    pub value: Option<f64>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaCell {
    pub model: String,
    pub metric: String,
    pub slice: String,
    /// Candidate minus baseline; None when either side is undefined.
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricTable {
    pub baseline: String,
    pub models: Vec<String>,
    pub metrics: Vec<String>,
    pub slices: Vec<String>,
    /// Model-major, then metric, then slice.
    pub cells: Vec<Cell>,
    /// One entry per non-baseline (model, metric, slice).
    pub deltas: Vec<DeltaCell>,
}

impl MetricTable {
    pub fn cell(&self, model: &str, metric: &str, slice: &str) -> Option<&Cell> {
        self.cells.iter().find(|c| c.model == model && c.metric == metric && c.slice == slice)
    }

    pub fn value(&self, model: &str, metric: &str, slice: &str) -> Option<f64> {
        self.cell(model, metric, slice)?.value
    }

    /// Delta vs. the baseline; the baseline's own delta is 0 where defined.
    pub fn delta(&self, model: &str, metric: &str, slice: &str) -> Option<f64> {
        if model == self.baseline {
            return self.value(model, metric, slice).map(|_| 0.0);
        }
        self.deltas
            .iter()
            .find(|d| d.model == model && d.metric == metric && d.slice == slice)?
            .delta
    }

    /// First non-baseline model, if any.
    pub fn candidate(&self) -> Option<&str> {
        self.models.iter().find(|m| **m != self.baseline).map(String::as_str)
    }

    /// `model,metric,slice,value,count,delta` rows; undefined values are empty.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["model", "metric", "slice", "value", "count", "delta"]).expect("in-memory write");
        let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        for c in &self.cells {
            let delta = if c.model == self.baseline { None } else { self.delta(&c.model, &c.metric, &c.slice) };
            w.write_record([
                c.model.clone(),
                c.metric.clone(),
                c.slice.clone(),
                opt(c.value),
                c.count.to_string(),
                opt(delta),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }
}

/// Slices with ALL prepended (once).
pub fn with_all_slice(slices: &[SliceSpec]) -> Vec<SliceSpec> {
    std::iter::once(SliceSpec::all())
        .chain(slices.iter().filter(|s| s.name != ALL_SLICE).cloned())
        .collect()
}

pub fn metric_table(
    models: &[ModelSpec],
    baseline: &str,
    metrics: &[MetricSpec],
    slices: &[SliceSpec],
    scope: EvalScope<'_>,
) -> Result<MetricTable, MetricError> {
    if !models.iter().any(|m| m.name == baseline) {
        return Err(MetricError::UnknownBaseline(baseline.to_string()));
    }
    let rankings = models
        .iter()
        .map(|m| rank_all(m, scope).map(|(r, _)| (m.name.clone(), r)))
        .collect::<Result<Vec<_>, _>>()?;
    let slices = with_all_slice(slices);
    let masks = slices
        .iter()
        .map(|s| slice_mask(s, scope.dataset))
        .collect::<Result<Vec<_>, _>>()?;
    table_from_rankings(&rankings, baseline, metrics, &slices, &masks, scope.dataset)
}

/// Builds the table from precomputed rankings and slice masks. `slices`
/// and `masks` are aligned and used as given.
pub fn table_from_rankings(
    rankings: &[(String, Vec<Ranking>)],
    baseline: &str,
    metrics: &[MetricSpec],
    slices: &[SliceSpec],
    masks: &[Vec<bool>],
    dataset: &DatasetTable,
) -> Result<MetricTable, MetricError> {
    if !rankings.iter().any(|(m, _)| m == baseline) {
        return Err(MetricError::UnknownBaseline(baseline.to_string()));
    }
    let jobs: Vec<(usize, usize)> =
        (0..rankings.len()).flat_map(|m| (0..metrics.len()).map(move |k| (m, k))).collect();
    let per_query: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|&(m, k)| query_values(&metrics[k], dataset, &rankings[m].1))
        .collect::<Result<_, _>>()?;

    let mut cells = Vec::with_capacity(jobs.len() * slices.len());
    for (&(m, k), values) in jobs.iter().zip(&per_query) {
        for (s, mask) in slices.iter().zip(masks) {
            let v = aggregate(values, mask);
            cells.push(Cell {
                model: rankings[m].0.clone(),
                metric: metrics[k].name.clone(),
                slice: s.name.clone(),
                value: v.value,
                count: v.count,
            });
        }
    }
    let base: Vec<&Cell> = cells.iter().filter(|c| c.model == baseline).collect();
    let deltas = cells
        .iter()
        .filter(|c| c.model != baseline)
        .map(|c| {
            let b = base.iter().find(|b| b.metric == c.metric && b.slice == c.slice);
            DeltaCell {
                model: c.model.clone(),
                metric: c.metric.clone(),
                slice: c.slice.clone(),
                delta: match (c.value, b.and_then(|b| b.value)) {
                    (Some(v), Some(bv)) => Some(v - bv),
                    _ => None,
                },
            }
        })
        .collect();
    Ok(MetricTable {
        baseline: baseline.to_string(),
        models: rankings.iter().map(|(m, _)| m.clone()).collect(),
        metrics: metrics.iter().map(|m| m.name.clone()).collect(),
        slices: slices.iter().map(|s| s.name.clone()).collect(),
        cells,
        deltas,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SliceDelta {
    pub slice: String,
    pub delta: f64,
}

/// Slices ordered by |delta| of the table's first candidate model.
pub fn top_moved_slices(table: &MetricTable, metric: &str, limit: usize) -> Result<Vec<SliceDelta>, MetricError> {
    match table.candidate() {
        Some(model) => top_moved_slices_for(table, model, metric, limit),
        None if table.metrics.iter().any(|m| m == metric) => Ok(Vec::new()),
        None => Err(MetricError::UnknownMetric(metric.to_string())),
    }
}

/// Slices sorted by |delta| descending (ties by name), undefined deltas
/// dropped, truncated to `limit`.
pub fn top_moved_slices_for(
    table: &MetricTable,
    model: &str,
    metric: &str,
    limit: usize,
) -> Result<Vec<SliceDelta>, MetricError> {
    if !table.metrics.iter().any(|m| m == metric) {
        return Err(MetricError::UnknownMetric(metric.to_string()));
    }
    if !table.models.iter().any(|m| m == model) {
        return Err(MetricError::UnknownModel(model.to_string()));
    }
    let mut out: Vec<SliceDelta> = table
        .slices
        .iter()
        .filter_map(|s| table.delta(model, metric, s).map(|delta| SliceDelta { slice: s.clone(), delta }))
        .collect();
    out.sort_by(|a, b| {
        b.delta
            .abs()
            .partial_cmp(&a.delta.abs())
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.slice.cmp(&b.slice))
    });
    out.truncate(limit);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table_with_deltas(deltas: &[(&str, Option<f64>)]) -> MetricTable {
        let mut cells = Vec::new();
        let mut dcells = Vec::new();
        for (s, d) in deltas {
            for m in ["base", "cand"] {
                cells.push(Cell {
                    model: m.into(),
                    metric: "ndcg".into(),
                    slice: (*s).into(),
                    value: d.map(|_| 0.5),
                    count: 1,
                });
            }
            dcells.push(DeltaCell { model: "cand".into(), metric: "ndcg".into(), slice: (*s).into(), delta: *d });
        }
        MetricTable {
            baseline: "base".into(),
            models: vec!["base".into(), "cand".into()],
            metrics: vec!["ndcg".into()],
            slices: deltas.iter().map(|(s, _)| s.to_string()).collect(),
            cells,
            deltas: dcells,
        }
    }

    fn names(v: &[SliceDelta]) -> Vec<&str> {
        v.iter().map(|s| s.slice.as_str()).collect()
    }

    #[test]
    fn top_moved_by_absolute_delta() {
        let t = table_with_deltas(&[("ALL", Some(-0.02)), ("quantities", Some(0.05)), ("hoodies", Some(-0.01))]);
        assert_eq!(names(&top_moved_slices(&t, "ndcg", 2).unwrap()), ["quantities", "ALL"]);
        assert_eq!(names(&top_moved_slices(&t, "ndcg", 10).unwrap()), ["quantities", "ALL", "hoodies"]);
    }

    #[test]
    fn top_moved_ties_and_undefined() {
        let t = table_with_deltas(&[("b", Some(0.1)), ("a", Some(-0.1)), ("c", Some(0.1)), ("z", None)]);
        assert_eq!(names(&top_moved_slices(&t, "ndcg", 10).unwrap()), ["a", "b", "c"]);
        assert!(matches!(top_moved_slices(&t, "nope", 1), Err(MetricError::UnknownMetric(_))));
    }

    #[test]
    fn aggregate_is_unweighted_mean() {
        let v = aggregate(&[1.0, 0.5, 0.0], &[true, true, false]);
        assert_eq!(v, MetricValue { value: Some(0.75), count: 2 });
        let v = aggregate(&[1.0], &[false]);
        assert!(v.is_undefined());
        assert_eq!(v.count, 0);
    }
}
