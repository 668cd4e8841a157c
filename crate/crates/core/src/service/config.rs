//! Declarative workspace bootstrap file (TOML).
//!
//! ```toml
//! baseline = "baseline"
//! anecdotes = ["q000"]
//!
//! [dataset]
//! path = "esci_sample.csv"
//! format = "csv"
//! columns = [{ name = "query_id", kind = "categorical", role = "query_key" }, ...]
//!
//! [[objectives]]
//! name = "click"
//! expr = "click_probability"
//!
//! [models.baseline]
//! click = 3.0
//!
//! [[metrics]]
//! name = "ndcg_click_prob"
//! kind = "ndcg"
//! gain = "click_probability"
//!
//! [[slices]]
//! name = "quantities"
//! predicate = 'matches(query_text, "[0-9]+")'
//! ```

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::dataset::{load_dataset, ColumnSchema, DataFormat, DatasetError, DatasetTable, Schema};
use crate::definition::{MetricDef, ObjectiveDef, SliceDef};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    /// Relative paths resolve against the config file's directory.
    pub path: PathBuf,
    #[serde(default = "default_format")]
    pub format: DataFormat,
    pub columns: Vec<ColumnSchema>,
}

fn default_format() -> DataFormat {
    DataFormat::Csv
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceConfig {
    pub baseline: String,
    #[serde(default)]
    pub anecdotes: Vec<String>,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub objectives: Vec<ObjectiveDef>,
    /// Model name to `objective = weight` terms, in file order.
    #[serde(default)]
    pub models: IndexMap<String, IndexMap<String, f64>>,
    #[serde(default)]
    pub metrics: Vec<MetricDef>,
    #[serde(default)]
    pub slices: Vec<SliceDef>,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config syntax: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("dataset {path}: {source}")]
    Dataset { path: PathBuf, source: DatasetError },
}

impl WorkspaceConfig {
    pub fn from_toml(text: &str) -> Result<WorkspaceConfig, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    /// Parses the file and rebases a relative dataset path onto its directory.
    pub fn load(path: &Path) -> Result<WorkspaceConfig, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let mut config = WorkspaceConfig::from_toml(&text)?;
        if config.dataset.path.is_relative() {
            if let Some(dir) = path.parent() {
                config.dataset.path = dir.join(&config.dataset.path);
            }
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    pub fn schema(&self) -> Result<Schema, ConfigError> {
        Schema::new(self.dataset.columns.clone())
            .map_err(|source| ConfigError::Dataset { path: self.dataset.path.clone(), source })
    }

    pub fn load_dataset(&self) -> Result<DatasetTable, ConfigError> {
        let path = &self.dataset.path;
        let file = File::open(path).map_err(|source| ConfigError::Io { path: path.clone(), source })?;
        load_dataset(BufReader::new(file), self.dataset.format, self.schema()?)
            .map_err(|source| ConfigError::Dataset { path: path.clone(), source })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = r#"
baseline = "base"
anecdotes = ["q1"]

[dataset]
path = "data.csv"
columns = [
  { name = "query_id", kind = "categorical", role = "query_key" },
  { name = "item_id", kind = "categorical", role = "item_key" },
  { name = "p", kind = "numeric", role = "item_feature" },
]

[[objectives]]
name = "p"
expr = "p"

[models.base]
p = 1.0

[models.cand]
p = 2.0

[[metrics]]
name = "ndcg_p"
kind = "ndcg"
gain = "p"
"#;

    #[test]
    fn parses_and_keeps_model_order() {
        let c = WorkspaceConfig::from_toml(TEXT).unwrap();
        assert_eq!(c.dataset.format, DataFormat::Csv);
        assert_eq!(c.models.keys().collect::<Vec<_>>(), ["base", "cand"]);
        assert_eq!(c.metrics[0].name, "ndcg_p");
        let again = WorkspaceConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn relative_dataset_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ws.toml");
        std::fs::write(&path, TEXT).unwrap();
        std::fs::write(dir.path().join("data.csv"), "query_id,item_id,p\nq1,a,0.5\n").unwrap();
        let c = WorkspaceConfig::load(&path).unwrap();
        assert_eq!(c.dataset.path, dir.path().join("data.csv"));
        assert_eq!(c.load_dataset().unwrap().row_count(), 1);
    }
}
