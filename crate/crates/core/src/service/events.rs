//! Session telemetry: the closed action vocabulary, event records, and the
//! append-only JSONL log.

use std::fmt;
use std::fs::{self, OpenOptions};
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::definition::{MetricDef, ObjectiveDef, SliceDef};

use super::workspace::{Applied, Mutation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    #[serde(rename = "objective.add")]
    ObjectiveAdd,
    #[serde(rename = "objective.edit")]
    ObjectiveEdit,
    #[serde(rename = "objective.remove")]
    ObjectiveRemove,
    #[serde(rename = "model.weight_change")]
    WeightChange,
    #[serde(rename = "model.term_add")]
    TermAdd,
    #[serde(rename = "model.term_remove")]
    TermRemove,
    #[serde(rename = "metric.define")]
    MetricDefine,
    #[serde(rename = "metric.view")]
    MetricView,
    #[serde(rename = "slice.define")]
    SliceDefine,
    #[serde(rename = "slice.view")]
    SliceView,
    #[serde(rename = "example.view")]
    ExampleView,
    #[serde(rename = "table.view")]
    TableView,
}

impl Action {
    pub const ALL: [Action; 12] = [
        Action::ObjectiveAdd,
        Action::ObjectiveEdit,
        Action::ObjectiveRemove,
        Action::WeightChange,
        Action::TermAdd,
        Action::TermRemove,
        Action::MetricDefine,
        Action::MetricView,
        Action::SliceDefine,
        Action::SliceView,
        Action::ExampleView,
        Action::TableView,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Action::ObjectiveAdd => "objective.add",
            Action::ObjectiveEdit => "objective.edit",
            Action::ObjectiveRemove => "objective.remove",
            Action::WeightChange => "model.weight_change",
            Action::TermAdd => "model.term_add",
            Action::TermRemove => "model.term_remove",
            Action::MetricDefine => "metric.define",
            Action::MetricView => "metric.view",
            Action::SliceDefine => "slice.define",
            Action::SliceView => "slice.view",
            Action::ExampleView => "example.view",
            Action::TableView => "table.view",
        }
    }

    /// True for actions that change the workspace.
    pub fn is_mutation(self) -> bool {
        !matches!(self, Action::MetricView | Action::SliceView | Action::ExampleView | Action::TableView)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Action {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Action::ALL.into_iter().find(|a| a.name() == s).ok_or_else(|| s.to_string())
    }
}

/// Action-specific fields; absent ones are omitted from the JSON.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Payload {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expr: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub old_expr: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub old: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub new: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slice: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub query_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_a: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_b: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric_def: Option<MetricDef>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slice_def: Option<SliceDef>,
    /// Workspace revision after the event.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub revision: Option<u64>,
    /// Trade-off key of the active model after the event.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tradeoff: Option<String>,
    /// Trade-off key of the active model before a design event.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tradeoff_before: Option<String>,
}

impl Payload {
    /// Payload describing a successfully applied mutation.
    pub fn for_mutation(m: &Mutation, applied: &Applied) -> Payload {
        let mut p = Payload::default();
        match m {
            Mutation::AddObjective(d) | Mutation::EditObjective(d) => {
                p.name = Some(d.name.clone());
                p.expr = Some(d.expr.clone());
                p.old_expr = applied.old_expr.clone();
                p.description = (!d.description.is_empty()).then(|| d.description.clone());
            }
            Mutation::RemoveObjective { name } => {
                p.name = Some(name.clone());
                p.old_expr = applied.old_expr.clone();
            }
            Mutation::SetWeight { model, objective, weight } | Mutation::AddTerm { model, objective, weight } => {
                p.model = Some(model.clone());
                p.objective = Some(objective.clone());
                p.old = applied.old_weight;
                p.new = Some(*weight);
            }
            Mutation::RemoveTerm { model, objective } => {
                p.model = Some(model.clone());
                p.objective = Some(objective.clone());
                p.old = applied.old_weight;
            }
            Mutation::DefineMetric(d) => {
                p.name = Some(d.name.clone());
                p.metric_def = Some(d.clone());
            }
            Mutation::DefineSlice(d) => {
                p.name = Some(d.name.clone());
                p.slice_def = Some(d.clone());
            }
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    /// Gap-free per actor, starting at 1.
    pub seq: u64,
    /// Unix epoch milliseconds.
    pub timestamp: u64,
    pub actor: String,
    pub action: Action,
    #[serde(default)]
    pub payload: Payload,
}

impl SessionEvent {
    pub fn action_of(m: &Mutation) -> Action {
        match m {
            Mutation::AddObjective(_) => Action::ObjectiveAdd,
            Mutation::EditObjective(_) => Action::ObjectiveEdit,
            Mutation::RemoveObjective { .. } => Action::ObjectiveRemove,
            Mutation::SetWeight { .. } => Action::WeightChange,
            Mutation::AddTerm { .. } => Action::TermAdd,
            Mutation::RemoveTerm { .. } => Action::TermRemove,
            Mutation::DefineMetric(_) => Action::MetricDefine,
            Mutation::DefineSlice(_) => Action::SliceDefine,
        }
    }

    /// Reconstructs the mutation a design or definition event records.
    pub fn mutation(&self) -> Result<Option<Mutation>, String> {
        let p = &self.payload;
        let field = |v: &Option<String>, f: &str| {
            v.clone().ok_or_else(|| format!("{} event {} lacks `{f}`", self.action, self.seq))
        };
        let weight = |v: Option<f64>, f: &str| v.ok_or_else(|| format!("{} event {} lacks `{f}`", self.action, self.seq));
        let objective_def = || -> Result<ObjectiveDef, String> {
            Ok(ObjectiveDef {
                name: field(&p.name, "name")?,
                expr: field(&p.expr, "expr")?,
                description: p.description.clone().unwrap_or_default(),
            })
        };
        Ok(Some(match self.action {
            Action::ObjectiveAdd => Mutation::AddObjective(objective_def()?),
            Action::ObjectiveEdit => Mutation::EditObjective(objective_def()?),
            Action::ObjectiveRemove => Mutation::RemoveObjective { name: field(&p.name, "name")? },
            Action::WeightChange => Mutation::SetWeight {
                model: field(&p.model, "model")?,
                objective: field(&p.objective, "objective")?,
                weight: weight(p.new, "new")?,
            },
            Action::TermAdd => Mutation::AddTerm {
                model: field(&p.model, "model")?,
                objective: field(&p.objective, "objective")?,
                weight: weight(p.new, "new")?,
            },
            Action::TermRemove => Mutation::RemoveTerm {
                model: field(&p.model, "model")?,
                objective: field(&p.objective, "objective")?,
            },
            Action::MetricDefine => {
                Mutation::DefineMetric(p.metric_def.clone().ok_or_else(|| format!("event {} lacks `metric_def`", self.seq))?)
            }
            Action::SliceDefine => {
                Mutation::DefineSlice(p.slice_def.clone().ok_or_else(|| format!("event {} lacks `slice_def`", self.seq))?)
            }
            Action::MetricView | Action::SliceView | Action::ExampleView | Action::TableView => return Ok(None),
        }))
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("events serialize")
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("line {line}: unknown action `{action}`")]
    UnknownAction { line: usize, action: String },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Reads a JSONL event log; blank lines are skipped.
pub fn read_events(reader: impl BufRead) -> Result<Vec<SessionEvent>, LogError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let n = i + 1;
        let raw: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| LogError::Malformed { line: n, message: e.to_string() })?;
        if let Some(action) = raw.get("action").and_then(|a| a.as_str()) {
            if action.parse::<Action>().is_err() {
                return Err(LogError::UnknownAction { line: n, action: action.to_string() });
            }
        }
        out.push(serde_json::from_value(raw).map_err(|e| LogError::Malformed { line: n, message: e.to_string() })?);
    }
    Ok(out)
}

pub fn write_events(mut writer: impl Write, events: &[SessionEvent]) -> io::Result<()> {
    for e in events {
        writeln!(writer, "{}", e.to_json_line())?;
    }
    Ok(())
}

/// Append-only session files, one `<actor>.jsonl` per actor.
#[derive(Debug, Clone)]
pub struct TelemetryDir {
    dir: PathBuf,
}

impl TelemetryDir {
    pub fn new(dir: impl Into<PathBuf>) -> io::Result<TelemetryDir> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(TelemetryDir { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, actor: &str) -> PathBuf {
        let safe: String = actor
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
            .collect();
        self.dir.join(format!("{safe}.jsonl"))
    }

    pub fn append(&self, event: &SessionEvent) -> io::Result<()> {
        let mut file = OpenOptions::new().create(true).append(true).open(self.path_for(&event.actor))?;
        file.write_all(format!("{}\n", event.to_json_line()).as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn action_names_round_trip() {
        for a in Action::ALL {
            assert_eq!(a.name().parse::<Action>().unwrap(), a);
            assert_eq!(serde_json::to_string(&a).unwrap(), format!("\"{}\"", a.name()));
        }
        assert!("model.delete".parse::<Action>().is_err());
    }

    #[test]
    fn weight_change_json_shape() {
        let e = SessionEvent {
            seq: 3,
            timestamp: 1_700_000_000_000,
            actor: "ana".into(),
            action: Action::WeightChange,
            payload: Payload {
                model: Some("candidate".into()),
                objective: Some("exact_purchase".into()),
                old: Some(0.2),
                new: Some(1.5),
                ..Payload::default()
            },
        };
        let json: serde_json::Value = serde_json::from_str(&e.to_json_line()).unwrap();
        assert_eq!(json["action"], "model.weight_change");
        assert_eq!(json["payload"]["old"], 0.2);
        assert_eq!(json["payload"]["new"], 1.5);
        assert!(json["payload"].get("slice").is_none());
        let back = read_events(e.to_json_line().as_bytes()).unwrap();
        assert_eq!(back, vec![e.clone()]);
        assert_eq!(
            back[0].mutation().unwrap(),
            Some(Mutation::SetWeight { model: "candidate".into(), objective: "exact_purchase".into(), weight: 1.5 })
        );
    }

    #[test]
    fn unknown_action_reported_with_line() {
        let log = "\n{\"seq\":1,\"timestamp\":0,\"actor\":\"a\",\"action\":\"model.explode\"}\n";
        match read_events(log.as_bytes()) {
            Err(LogError::UnknownAction { line, action }) => {
                assert_eq!(line, 2);
                assert_eq!(action, "model.explode");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn telemetry_files_per_actor() {
        let dir = tempfile::tempdir().unwrap();
        let t = TelemetryDir::new(dir.path().join("logs")).unwrap();
        for (seq, actor) in [(1, "ana"), (1, "bo/b"), (2, "ana")] {
            t.append(&SessionEvent {
                seq,
                timestamp: 0,
                actor: actor.into(),
                action: Action::TableView,
                payload: Payload::default(),
            })
            .unwrap();
        }
        let ana = read_events(io::BufReader::new(fs::File::open(t.path_for("ana")).unwrap())).unwrap();
        assert_eq!(ana.iter().map(|e| e.seq).collect::<Vec<_>>(), [1, 2]);
        assert!(t.path_for("bo/b").ends_with("bo_b.jsonl"));
    }
}
