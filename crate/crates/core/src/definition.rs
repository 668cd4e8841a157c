//! Serializable objective, metric and slice definitions (DSL strings), as
//! they appear in config files, snapshots and API payloads, plus their
//! compilation against a schema.

use serde::{Deserialize, Serialize};

use crate::dataset::{validate_in_scope, Schema, Scope, ValidationReport};
use crate::expr::{self, Expr, ParseError, StaticType};
use crate::metrics::{MetricKind, MetricSpec, SliceSpec, ALL_SLICE};
use crate::ranker::ObjectiveSpec;

pub const DEFAULT_K: usize = 8;

fn default_k() -> usize {
    DEFAULT_K
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveDef {
    pub name: String,
    pub expr: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetricKindDef {
    Ndcg {
        gain: String,
        #[serde(default = "default_k")]
        k: usize,
    },
    Density {
        predicate: String,
        #[serde(default = "default_k")]
        k: usize,
    },
    CrossEntropy {
        label: String,
        prob: String,
    },
    Mean {
        expr: String,
        #[serde(default = "default_k")]
        k: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricDef {
    pub name: String,
    #[serde(flatten)]
    pub kind: MetricKindDef,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceDef {
    pub name: String,
    pub predicate: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DefinitionError {
    #[error("invalid name `{0}`")]
    InvalidName(String),
    #[error("in `{expr}`: {error}")]
    Parse { expr: String, error: ParseError },
    #[error("{0}")]
    Invalid(ValidationReport),
    #[error("{0}")]
    Constraint(String),
}

pub fn valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c == '_' || c.is_ascii_alphabetic())
        && chars.all(|c| c == '_' || c.is_ascii_alphanumeric())
}

fn check_name(name: &str) -> Result<(), DefinitionError> {
    if valid_name(name) {
        Ok(())
    } else {
        Err(DefinitionError::InvalidName(name.to_string()))
    }
}

fn parse(text: &str) -> Result<Expr, DefinitionError> {
    expr::parse(text).map_err(|error| DefinitionError::Parse { expr: text.to_string(), error })
}

fn validate(schema: &Schema, exprs: &[&Expr], scope: Scope) -> Result<(), DefinitionError> {
    let owned: Vec<Expr> = exprs.iter().map(|e| (*e).clone()).collect();
    let report = validate_in_scope(schema, &owned, scope);
    if report.is_empty() {
        Ok(())
    } else {
        Err(DefinitionError::Invalid(report))
    }
}

fn require_boolean(schema: &Schema, e: &Expr, role: &str) -> Result<(), DefinitionError> {
    match expr::static_type(e, &|n| schema.static_type(n)) {
        Some(StaticType::Boolean) => Ok(()),
        _ => Err(DefinitionError::Constraint(format!("{role} `{e}` must be 0/1-valued"))),
    }
}

fn require_numeric(schema: &Schema, e: &Expr, role: &str) -> Result<(), DefinitionError> {
    match expr::static_type(e, &|n| schema.static_type(n)) {
        Some(StaticType::Number | StaticType::Boolean) => Ok(()),
        _ => Err(DefinitionError::Constraint(format!("{role} `{e}` must be numeric"))),
    }
}

impl ObjectiveDef {
    pub fn compile(&self, schema: &Schema) -> Result<ObjectiveSpec, DefinitionError> {
        check_name(&self.name)?;
        let e = parse(&self.expr)?;
        validate(schema, &[&e], Scope::Item)?;
        require_numeric(schema, &e, "objective")?;
        Ok(ObjectiveSpec { name: self.name.clone(), expr: e, description: self.description.clone() })
    }
}

impl From<&ObjectiveSpec> for ObjectiveDef {
    fn from(o: &ObjectiveSpec) -> Self {
        ObjectiveDef { name: o.name.clone(), expr: o.expr.to_string(), description: o.description.clone() }
    }
}

impl MetricDef {
    pub fn compile(&self, schema: &Schema) -> Result<MetricSpec, DefinitionError> {
        check_name(&self.name)?;
        let positive = |k: usize| {
            if k == 0 {
                Err(DefinitionError::Constraint(format!("metric `{}`: k must be positive", self.name)))
            } else {
                Ok(k)
            }
        };
        let kind = match &self.kind {
            MetricKindDef::Ndcg { gain, k } => {
                let gain = parse(gain)?;
                validate(schema, &[&gain], Scope::Item)?;
                require_numeric(schema, &gain, "gain")?;
                MetricKind::Ndcg { gain, k: positive(*k)? }
            }
            MetricKindDef::Density { predicate, k } => {
                let predicate = parse(predicate)?;
                validate(schema, &[&predicate], Scope::Item)?;
                require_boolean(schema, &predicate, "density predicate")?;
                MetricKind::Density { predicate, k: positive(*k)? }
            }
            MetricKindDef::CrossEntropy { label, prob } => {
                let (label, prob) = (parse(label)?, parse(prob)?);
                validate(schema, &[&label, &prob], Scope::Item)?;
                require_boolean(schema, &label, "label")?;
                require_numeric(schema, &prob, "probability")?;
                MetricKind::CrossEntropy { label, prob }
            }
            MetricKindDef::Mean { expr, k } => {
                let e = parse(expr)?;
                validate(schema, &[&e], Scope::Item)?;
                require_numeric(schema, &e, "mean expression")?;
                MetricKind::Mean { expr: e, k: positive(*k)? }
            }
        };
        Ok(MetricSpec { name: self.name.clone(), kind, description: self.description.clone() })
    }
}

impl From<&MetricSpec> for MetricDef {
    fn from(m: &MetricSpec) -> Self {
        let kind = match &m.kind {
            MetricKind::Ndcg { gain, k } => MetricKindDef::Ndcg { gain: gain.to_string(), k: *k },
            MetricKind::Density { predicate, k } => {
                MetricKindDef::Density { predicate: predicate.to_string(), k: *k }
            }
            MetricKind::CrossEntropy { label, prob } => {
                MetricKindDef::CrossEntropy { label: label.to_string(), prob: prob.to_string() }
            }
            MetricKind::Mean { expr, k } => MetricKindDef::Mean { expr: expr.to_string(), k: *k },
        };
        MetricDef { name: m.name.clone(), kind, description: m.description.clone() }
    }
}

impl SliceDef {
    pub fn compile(&self, schema: &Schema) -> Result<SliceSpec, DefinitionError> {
        check_name(&self.name)?;
        if self.name == ALL_SLICE {
            return Err(DefinitionError::Constraint(format!("slice name `{ALL_SLICE}` is reserved")));
        }
        let predicate = parse(&self.predicate)?;
        validate(schema, &[&predicate], Scope::Query)?;
        require_boolean(schema, &predicate, "slice predicate")?;
        Ok(SliceSpec { name: self.name.clone(), predicate, description: self.description.clone() })
    }
}

impl From<&SliceSpec> for SliceDef {
    fn from(s: &SliceSpec) -> Self {
        SliceDef { name: s.name.clone(), predicate: s.predicate.to_string(), description: s.description.clone() }
    }
}
