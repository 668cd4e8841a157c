//! Workloads shared by the benchmarks.

use std::path::PathBuf;
use std::sync::Arc;

use tradeoff_core::fixture::esci_dataset;
use tradeoff_core::service::{Mutation, Workspace, WorkspaceConfig};

pub fn fixture_config() -> WorkspaceConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/workspace.toml");
    WorkspaceConfig::load(&path).expect("shipped config loads")
}

/// The shipped objectives, models, metrics and slices over a generated
/// dataset of `queries` × `items`.
pub fn workspace(queries: usize, items: usize) -> Workspace {
    let dataset = Arc::new(esci_dataset(queries, items, 4242));
    Workspace::from_config(&fixture_config(), dataset).expect("shipped config is valid")
}

pub fn set_exact_weight(weight: f64) -> Mutation {
    Mutation::SetWeight { model: "candidate".into(), objective: "exact_purchase".into(), weight }
}
