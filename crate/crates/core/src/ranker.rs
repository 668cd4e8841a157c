//! Linear multi-objective scoring, ranking, attribution and rank diffs.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::dataset::{QueryGroup, Schema};
use crate::expr::{EvalError, Expr, Warnings};

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveSpec {
    pub name: String,
    pub expr: Expr,
    pub description: String,
}

impl ObjectiveSpec {
    pub fn new(name: &str, expr: Expr) -> Self {
        ObjectiveSpec { name: name.to_string(), expr, description: String::new() }
    }

    pub fn with_description(mut self, d: &str) -> Self {
        self.description = d.to_string();
        self
    }
}

/// Objectives keyed by name, in definition order.
pub type Objectives = IndexMap<String, ObjectiveSpec>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub objective: String,
    pub weight: f64,
}

/// A weighted linear combination of objectives.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub name: String,
    terms: Vec<Term>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RankerError {
    #[error("model `{model}` references unknown objective `{objective}`")]
    UnknownObjective { model: String, objective: String },
    #[error("invalid model `{model}`: {reason}")]
    InvalidModel { model: String, reason: String },
    #[error("rankings are over different item sets for query `{0}`")]
    ItemSetMismatch(String),
    #[error("objective `{objective}`: {source}")]
    Eval { objective: String, source: EvalError },
}

impl ModelSpec {
    pub fn new(name: &str, terms: Vec<Term>) -> Result<ModelSpec, RankerError> {
        let invalid = |reason: String| RankerError::InvalidModel { model: name.to_string(), reason };
        if terms.is_empty() {
            return Err(invalid("a model needs at least one term".into()));
        }
        for (i, t) in terms.iter().enumerate() {
            if !t.weight.is_finite() {
                return Err(invalid(format!("weight of `{}` is not finite", t.objective)));
            }
            if terms[..i].iter().any(|u| u.objective == t.objective) {
                return Err(invalid(format!("objective `{}` appears twice", t.objective)));
            }
        }
        Ok(ModelSpec { name: name.to_string(), terms })
    }

    /// Builds from `(objective, weight)` pairs.
    pub fn from_pairs<'a>(
        name: &str,
        pairs: impl IntoIterator<Item = (&'a str, f64)>,
    ) -> Result<ModelSpec, RankerError> {
        let terms = pairs
            .into_iter()
            .map(|(o, w)| Term { objective: o.to_string(), weight: w })
            .collect();
        ModelSpec::new(name, terms)
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn weight(&self, objective: &str) -> Option<f64> {
        self.terms.iter().find(|t| t.objective == objective).map(|t| t.weight)
    }

    pub fn uses(&self, objective: &str) -> bool {
        self.weight(objective).is_some()
    }

    /// `objective: weight` map in term order.
    pub fn weights(&self) -> IndexMap<String, f64> {
        self.terms.iter().map(|t| (t.objective.clone(), t.weight)).collect()
    }

    /// Same terms with every weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> ModelSpec {
        ModelSpec {
            name: self.name.clone(),
            terms: self
                .terms
                .iter()
                .map(|t| Term { objective: t.objective.clone(), weight: t.weight * factor })
                .collect(),
        }
    }

    pub(crate) fn set_weight(&mut self, objective: &str, weight: f64) -> bool {
        match self.terms.iter_mut().find(|t| t.objective == objective) {
            Some(t) => {
                t.weight = weight;
                true
            }
            None => false,
        }
    }

    pub(crate) fn push_term(&mut self, term: Term) {
        self.terms.push(term);
    }

    pub(crate) fn remove_term(&mut self, objective: &str) -> bool {
        let before = self.terms.len();
        self.terms.retain(|t| t.objective != objective);
        before != self.terms.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Component {
    pub objective: String,
    pub raw: f64,
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredItem {
    pub item_id: Arc<str>,
    /// Index of the item within its query group (dataset order).
    pub position: usize,
    pub components: Vec<Component>,
    pub combined: f64,
}

pub fn score_items(
    model: &ModelSpec,
    objectives: &Objectives,
    schema: &Schema,
    group: &QueryGroup,
) -> Result<Vec<ScoredItem>, RankerError> {
    score_items_counted(model, objectives, schema, group, &mut Warnings::default())
}

/// [`score_items`], accumulating degenerate-evaluation warnings.
pub fn score_items_counted(
    model: &ModelSpec,
    objectives: &Objectives,
    schema: &Schema,
    group: &QueryGroup,
    warnings: &mut Warnings,
) -> Result<Vec<ScoredItem>, RankerError> {
    let exprs = resolve(model, objectives)?;
    group
        .items
        .iter()
        .enumerate()
        .map(|(position, item)| {
            let row = crate::dataset::RowView { schema, group, item };
            let raws = exprs
                .iter()
                .map(|(t, e)| {
                    e.eval(&row, warnings).map_err(|source| RankerError::Eval {
                        objective: t.objective.clone(),
                        source,
                    })
                })
                .collect::<Result<Vec<f64>, _>>()?;
            Ok(combine(model, item.item_id.clone(), position, &raws))
        })
        .collect()
}

fn resolve<'a>(model: &'a ModelSpec, objectives: &'a Objectives) -> Result<Vec<(&'a Term, &'a Expr)>, RankerError> {
    model
        .terms
        .iter()
        .map(|t| {
            objectives
                .get(&t.objective)
                .map(|o| (t, &o.expr))
                .ok_or_else(|| RankerError::UnknownObjective {
                    model: model.name.clone(),
                    objective: t.objective.clone(),
                })
        })
        .collect()
}

/// Combines precomputed raw objective values (in term order) into a scored item.
pub fn combine(model: &ModelSpec, item_id: Arc<str>, position: usize, raws: &[f64]) -> ScoredItem {
    debug_assert_eq!(raws.len(), model.terms.len());
    let mut combined = 0.0;
    let components = model
        .terms
        .iter()
        .zip(raws)
        .map(|(t, &raw)| {
            let contribution = t.weight * raw;
            combined += contribution;
            Component { objective: t.objective.clone(), raw, contribution }
        })
        .collect();
    ScoredItem { item_id, position, components, combined }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedItem {
    pub item_id: Arc<str>,
    pub score: f64,
    pub position: usize,
}

/// Items of one query, best first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ranking {
    pub query_id: Arc<str>,
    pub items: Vec<RankedItem>,
}

impl Ranking {
    /// 1-based rank of `item_id`.
    pub fn rank_of(&self, item_id: &str) -> Option<usize> {
        self.items.iter().position(|i| &*i.item_id == item_id).map(|p| p + 1)
    }

    /// Dataset-order positions in ranked order.
    pub fn positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.items.iter().map(|i| i.position)
    }
}

/// Sorts by combined score descending; ties go to the earlier dataset
/// position, then the smaller item id.
pub fn rank(query_id: Arc<str>, scored: &[ScoredItem]) -> Ranking {
    let mut order: Vec<&ScoredItem> = scored.iter().collect();
    order.sort_by(|a, b| {
        b.combined
            .partial_cmp(&a.combined)
            .unwrap_or(Ordering::Equal)
            .then(a.position.cmp(&b.position))
            .then_with(|| a.item_id.cmp(&b.item_id))
    });
    Ranking {
        query_id,
        items: order
            .into_iter()
            .map(|s| RankedItem { item_id: s.item_id.clone(), score: s.combined, position: s.position })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Share {
    pub objective: String,
    pub contribution: f64,
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Attribution {
    pub shares: Vec<Share>,
    pub all_zero: bool,
}

/// Exact linear decomposition; shares are |contribution| over the sum of
/// absolute contributions.
pub fn attribute(item: &ScoredItem) -> Attribution {
    let total: f64 = item.components.iter().map(|c| c.contribution.abs()).sum();
    let all_zero = total == 0.0;
    Attribution {
        shares: item
            .components
            .iter()
            .map(|c| Share {
                objective: c.objective.clone(),
                contribution: c.contribution,
                share: if all_zero { 0.0 } else { c.contribution.abs() / total },
            })
            .collect(),
        all_zero,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Movement {
    pub item_id: Arc<str>,
    pub rank_a: usize,
    pub rank_b: usize,
    /// `rank_a - rank_b`; positive means the item moved up in `b`.
    pub movement: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankDiff {
    pub query_id: Arc<str>,
    /// In `a`'s rank order.
    pub items: Vec<Movement>,
    pub promoted: Vec<Arc<str>>,
    pub demoted: Vec<Arc<str>>,
}

impl RankDiff {
    pub fn movement_of(&self, item_id: &str) -> Option<i64> {
        self.items.iter().find(|m| &*m.item_id == item_id).map(|m| m.movement)
    }
}

pub fn compare_rankings(a: &Ranking, b: &Ranking) -> Result<RankDiff, RankerError> {
    let mismatch = || RankerError::ItemSetMismatch(a.query_id.to_string());
    if a.query_id != b.query_id || a.items.len() != b.items.len() {
        return Err(mismatch());
    }
    let ranks_b: HashMap<&str, usize> =
        b.items.iter().enumerate().map(|(i, it)| (&*it.item_id, i + 1)).collect();
    if ranks_b.len() != b.items.len() {
        return Err(mismatch());
    }
    let mut items = Vec::with_capacity(a.items.len());
    let (mut promoted, mut demoted) = (Vec::new(), Vec::new());
    for (i, it) in a.items.iter().enumerate() {
        let rank_a = i + 1;
        let rank_b = *ranks_b.get(&*it.item_id).ok_or_else(mismatch)?;
        let movement = rank_a as i64 - rank_b as i64;
        match movement.cmp(&0) {
            Ordering::Greater => promoted.push(it.item_id.clone()),
            Ordering::Less => demoted.push(it.item_id.clone()),
            Ordering::Equal => {}
        }
        items.push(Movement { item_id: it.item_id.clone(), rank_a, rank_b, movement });
    }
    Ok(RankDiff { query_id: a.query_id.clone(), items, promoted, demoted })
}
