//! The mutable design state: objectives, models, metrics and slices over
//! one immutable dataset, plus snapshot export/import.

use std::fmt;
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::dataset::DatasetTable;
use crate::definition::{valid_name, DefinitionError, MetricDef, ObjectiveDef, SliceDef};
use crate::metrics::{MetricError, MetricSpec, SliceSpec};
use crate::ranker::{ModelSpec, Objectives, RankerError, Term};

use super::config::WorkspaceConfig;

pub const SNAPSHOT_FORMAT: u32 = 1;

/// A single typed change to the workspace.
#[derive(Debug, Clone, PartialEq)]
pub enum Mutation {
    AddObjective(ObjectiveDef),
    EditObjective(ObjectiveDef),
    RemoveObjective { name: String },
    SetWeight { model: String, objective: String, weight: f64 },
    /// Creates the model when it does not exist yet.
    AddTerm { model: String, objective: String, weight: f64 },
    RemoveTerm { model: String, objective: String },
    DefineMetric(MetricDef),
    DefineSlice(SliceDef),
}

impl Mutation {
    /// The model whose terms this mutation changes.
    pub fn model(&self) -> Option<&str> {
        match self {
            Mutation::SetWeight { model, .. }
            | Mutation::AddTerm { model, .. }
            | Mutation::RemoveTerm { model, .. } => Some(model),
            _ => None,
        }
    }
}

/// What a mutation replaced, for event payloads.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Applied {
    pub old_weight: Option<f64>,
    pub old_expr: Option<String>,
    pub created: bool,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Rejection {
    #[error(transparent)]
    Definition(#[from] DefinitionError),
    #[error("{kind} `{name}` already exists")]
    Duplicate { kind: &'static str, name: String },
    #[error("objective `{objective}` is still used by models {}", models.join(", "))]
    InUse { objective: String, models: Vec<String> },
    #[error("{0}")]
    Model(String),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WorkspaceError {
    #[error("validation failed: {0}")]
    ValidationFailed(Rejection),
    #[error("unknown {kind} `{name}`")]
    UnknownEntity { kind: &'static str, name: String },
    #[error("unknown query `{0}`")]
    UnknownQuery(String),
    #[error("snapshot does not fit the dataset: {0}")]
    SchemaMismatch(String),
    #[error("snapshot was taken against dataset {expected}, loaded dataset is {found}")]
    DatasetHashMismatch { expected: String, found: String },
    #[error(transparent)]
    Metric(#[from] MetricError),
}

impl From<Rejection> for WorkspaceError {
    fn from(r: Rejection) -> Self {
        WorkspaceError::ValidationFailed(r)
    }
}

impl From<DefinitionError> for WorkspaceError {
    fn from(e: DefinitionError) -> Self {
        WorkspaceError::ValidationFailed(Rejection::Definition(e))
    }
}

fn unknown(kind: &'static str, name: &str) -> WorkspaceError {
    WorkspaceError::UnknownEntity { kind, name: name.to_string() }
}

fn invalid_model(e: RankerError) -> WorkspaceError {
    Rejection::Model(e.to_string()).into()
}

#[derive(Debug, Clone)]
pub struct Workspace {
    dataset: Arc<DatasetTable>,
    objectives: Objectives,
    models: IndexMap<String, ModelSpec>,
    baseline: String,
    metrics: IndexMap<String, MetricSpec>,
    slices: IndexMap<String, SliceSpec>,
    revision: u64,
}

impl PartialEq for Workspace {
    fn eq(&self, other: &Self) -> bool {
        (Arc::ptr_eq(&self.dataset, &other.dataset) || self.dataset == other.dataset)
            && self.objectives == other.objectives
            && self.models == other.models
            && self.baseline == other.baseline
            && self.metrics == other.metrics
            && self.slices == other.slices
            && self.revision == other.revision
    }
}

/// Definitions shared by config bootstrap and snapshot import.
struct Definitions<'a> {
    baseline: &'a str,
    objectives: &'a [ObjectiveDef],
    models: &'a IndexMap<String, IndexMap<String, f64>>,
    metrics: &'a [MetricDef],
    slices: &'a [SliceDef],
}

impl Workspace {
    pub fn from_config(config: &WorkspaceConfig, dataset: Arc<DatasetTable>) -> Result<Workspace, WorkspaceError> {
        Workspace::build(
            Definitions {
                baseline: &config.baseline,
                objectives: &config.objectives,
                models: &config.models,
                metrics: &config.metrics,
                slices: &config.slices,
            },
            dataset,
            0,
        )
    }

    fn build(defs: Definitions<'_>, dataset: Arc<DatasetTable>, revision: u64) -> Result<Workspace, WorkspaceError> {
        let schema = dataset.schema();
        let mut objectives = Objectives::new();
        for def in defs.objectives {
            let spec = def.compile(schema)?;
            if objectives.insert(def.name.clone(), spec).is_some() {
                return Err(Rejection::Duplicate { kind: "objective", name: def.name.clone() }.into());
            }
        }
        let mut models = IndexMap::new();
        for (name, weights) in defs.models {
            if !valid_name(name) {
                return Err(DefinitionError::InvalidName(name.clone()).into());
            }
            let model = ModelSpec::from_pairs(name, weights.iter().map(|(o, w)| (o.as_str(), *w)))
                .map_err(invalid_model)?;
            if let Some(t) = model.terms().iter().find(|t| !objectives.contains_key(&t.objective)) {
                return Err(unknown("objective", &t.objective));
            }
            models.insert(name.clone(), model);
        }
        if !models.contains_key(defs.baseline) {
            return Err(unknown("model", defs.baseline));
        }
        let mut metrics = IndexMap::new();
        for def in defs.metrics {
            if metrics.insert(def.name.clone(), def.compile(schema)?).is_some() {
                return Err(Rejection::Duplicate { kind: "metric", name: def.name.clone() }.into());
            }
        }
        let mut slices = IndexMap::new();
        for def in defs.slices {
            if slices.insert(def.name.clone(), def.compile(schema)?).is_some() {
                return Err(Rejection::Duplicate { kind: "slice", name: def.name.clone() }.into());
            }
        }
        Ok(Workspace { dataset, objectives, models, baseline: defs.baseline.to_string(), metrics, slices, revision })
    }

    pub fn dataset(&self) -> &Arc<DatasetTable> {
        &self.dataset
    }

    pub fn objectives(&self) -> &Objectives {
        &self.objectives
    }

    pub fn models(&self) -> &IndexMap<String, ModelSpec> {
        &self.models
    }

    pub fn model(&self, name: &str) -> Result<&ModelSpec, WorkspaceError> {
        self.models.get(name).ok_or_else(|| unknown("model", name))
    }

    pub fn baseline(&self) -> &str {
        &self.baseline
    }

    pub fn metrics(&self) -> &IndexMap<String, MetricSpec> {
        &self.metrics
    }

    pub fn slices(&self) -> &IndexMap<String, SliceSpec> {
        &self.slices
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    /// Canonical identity of a model's trade-off: terms sorted by objective
    /// name, each with its expression and full-precision weight.
    pub fn tradeoff_key(&self, model: &str) -> Option<String> {
        let m = self.models.get(model)?;
        let mut terms: Vec<String> = m
            .terms()
            .iter()
            .map(|t| {
                let expr = self.objectives.get(&t.objective).map(|o| o.expr.to_string()).unwrap_or_default();
                format!("{}[{}]*{}", t.objective, expr, t.weight)
            })
            .collect();
        terms.sort();
        Some(terms.join(" + "))
    }

    /// Applies one mutation; on error the workspace is unchanged.
    pub fn apply(&mut self, mutation: &Mutation) -> Result<Applied, WorkspaceError> {
        let schema = self.dataset.schema();
        let mut applied = Applied::default();
        match mutation {
            Mutation::AddObjective(def) => {
                if self.objectives.contains_key(&def.name) {
                    return Err(Rejection::Duplicate { kind: "objective", name: def.name.clone() }.into());
                }
                let spec = def.compile(schema)?;
                self.objectives.insert(def.name.clone(), spec);
                applied.created = true;
            }
            Mutation::EditObjective(def) => {
                let old = self.objectives.get(&def.name).ok_or_else(|| unknown("objective", &def.name))?;
                let spec = def.compile(schema)?;
                applied.old_expr = Some(old.expr.to_string());
                self.objectives.insert(def.name.clone(), spec);
            }
            Mutation::RemoveObjective { name } => {
                let old = self.objectives.get(name).ok_or_else(|| unknown("objective", name))?;
                let users: Vec<String> =
                    self.models.values().filter(|m| m.uses(name)).map(|m| m.name.clone()).collect();
                if !users.is_empty() {
                    return Err(Rejection::InUse { objective: name.clone(), models: users }.into());
                }
                applied.old_expr = Some(old.expr.to_string());
                self.objectives.shift_remove(name);
            }
            Mutation::SetWeight { model, objective, weight } => {
                check_weight(*weight)?;
                let m = self.models.get_mut(model).ok_or_else(|| unknown("model", model))?;
                applied.old_weight = Some(m.weight(objective).ok_or_else(|| unknown("term", objective))?);
                m.set_weight(objective, *weight);
            }
            Mutation::AddTerm { model, objective, weight } => {
                check_weight(*weight)?;
                if !self.objectives.contains_key(objective) {
                    return Err(unknown("objective", objective));
                }
                let term = Term { objective: objective.clone(), weight: *weight };
                match self.models.get_mut(model) {
                    Some(m) if m.uses(objective) => {
                        return Err(Rejection::Duplicate { kind: "term", name: objective.clone() }.into())
                    }
                    Some(m) => m.push_term(term),
                    None => {
                        if !valid_name(model) {
                            return Err(DefinitionError::InvalidName(model.clone()).into());
                        }
                        let m = ModelSpec::new(model, vec![term]).map_err(invalid_model)?;
                        self.models.insert(model.clone(), m);
                        applied.created = true;
                    }
                }
            }
            Mutation::RemoveTerm { model, objective } => {
                let m = self.models.get_mut(model).ok_or_else(|| unknown("model", model))?;
                let old = m.weight(objective).ok_or_else(|| unknown("term", objective))?;
                if m.terms().len() == 1 {
                    return Err(Rejection::Model(format!("cannot remove the last term of model `{model}`")).into());
                }
                applied.old_weight = Some(old);
                m.remove_term(objective);
            }
            Mutation::DefineMetric(def) => {
                let spec = def.compile(schema)?;
                applied.created = self.metrics.insert(def.name.clone(), spec).is_none();
            }
            Mutation::DefineSlice(def) => {
                let spec = def.compile(schema)?;
                applied.created = self.slices.insert(def.name.clone(), spec).is_none();
            }
        }
        self.revision += 1;
        Ok(applied)
    }

    /// Decomposes a whole-model replacement into term mutations: weight
    /// changes for kept terms, then additions, then removals. Validated
    /// against the current state; an unchanged model yields no mutations.
    pub fn plan_model(&self, name: &str, weights: &IndexMap<String, f64>) -> Result<Vec<Mutation>, WorkspaceError> {
        if weights.is_empty() {
            return Err(Rejection::Model(format!("model `{name}` needs at least one term")).into());
        }
        for (o, w) in weights {
            check_weight(*w)?;
            if !self.objectives.contains_key(o) {
                return Err(unknown("objective", o));
            }
        }
        let existing = self.models.get(name);
        let mut plan = Vec::new();
        if let Some(m) = existing {
            for t in m.terms() {
                if let Some(&w) = weights.get(&t.objective) {
                    if w.to_bits() != t.weight.to_bits() {
                        plan.push(Mutation::SetWeight { model: name.into(), objective: t.objective.clone(), weight: w });
                    }
                }
            }
        }
        for (o, &w) in weights {
            if !existing.is_some_and(|m| m.uses(o)) {
                plan.push(Mutation::AddTerm { model: name.into(), objective: o.clone(), weight: w });
            }
        }
        if let Some(m) = existing {
            for t in m.terms() {
                if !weights.contains_key(&t.objective) {
                    plan.push(Mutation::RemoveTerm { model: name.into(), objective: t.objective.clone() });
                }
            }
        }
        Ok(plan)
    }

    pub fn export_snapshot(&self) -> Snapshot {
        Snapshot {
            format_version: SNAPSHOT_FORMAT,
            dataset_hash: self.dataset.content_hash(),
            baseline: self.baseline.clone(),
            objectives: self.objectives.values().map(ObjectiveDef::from).collect(),
            models: self.models.iter().map(|(n, m)| (n.clone(), m.weights())).collect(),
            metrics: self.metrics.values().map(MetricDef::from).collect(),
            slices: self.slices.values().map(SliceDef::from).collect(),
            revision: self.revision,
        }
    }

    pub fn import_snapshot(snapshot: &Snapshot, dataset: Arc<DatasetTable>) -> Result<Workspace, WorkspaceError> {
        if snapshot.format_version != SNAPSHOT_FORMAT {
            return Err(WorkspaceError::SchemaMismatch(format!(
                "unsupported snapshot format {}",
                snapshot.format_version
            )));
        }
        let found = dataset.content_hash();
        if found != snapshot.dataset_hash {
            return Err(WorkspaceError::DatasetHashMismatch { expected: snapshot.dataset_hash.clone(), found });
        }
        Workspace::build(
            Definitions {
                baseline: &snapshot.baseline,
                objectives: &snapshot.objectives,
                models: &snapshot.models,
                metrics: &snapshot.metrics,
                slices: &snapshot.slices,
            },
            dataset,
            snapshot.revision,
        )
        .map_err(|e| WorkspaceError::SchemaMismatch(e.to_string()))
    }
}

fn check_weight(w: f64) -> Result<(), WorkspaceError> {
    if w.is_finite() {
        Ok(())
    } else {
        Err(Rejection::Model(format!("weight {w} is not finite")).into())
    }
}

/// Portable workspace document; the dataset is referenced by content hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub format_version: u32,
    pub dataset_hash: String,
    pub baseline: String,
    pub objectives: Vec<ObjectiveDef>,
    pub models: IndexMap<String, IndexMap<String, f64>>,
    pub metrics: Vec<MetricDef>,
    pub slices: Vec<SliceDef>,
    pub revision: u64,
}

impl fmt::Display for Snapshot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serde_json::to_string_pretty(self).map_err(|_| fmt::Error)?)
    }
}
