//! Batch commands behind the `tradeoff` binary.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde_json::json;

use tradeoff_core::analysis::{classify_log, measures, records_to_csv, AnalysisError, SessionMetrics};
use tradeoff_core::fixture;
use tradeoff_core::metrics::MetricTable;
use tradeoff_core::service::{
    read_events, replay_state, Service, ServiceOptions, SideBySide, Workspace, WorkspaceConfig,
};

pub type CmdResult<T> = Result<T, Box<dyn std::error::Error + Send + Sync>>;

/// Loads the config and its dataset and builds the initial workspace.
pub fn open_workspace(config: &Path) -> CmdResult<(WorkspaceConfig, Workspace)> {
    let config = WorkspaceConfig::load(config)?;
    let dataset = Arc::new(config.load_dataset()?);
    let ws = Workspace::from_config(&config, dataset)?;
    Ok((config, ws))
}

/// `model,metric,slice,delta` rows for every non-baseline cell.
pub fn deltas_csv(table: &MetricTable) -> String {
    let mut out = String::from("model,metric,slice,delta\n");
    for d in &table.deltas {
        let v = d.delta.map(|x| format!("{x}")).unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{}", d.model, d.metric, d.slice, v);
    }
    out
}

fn write_table(table: &MetricTable, out: &Path) -> CmdResult<Vec<PathBuf>> {
    fs::create_dir_all(out)?;
    let files = [
        ("table.csv", table.to_csv()),
        ("table.json", serde_json::to_string_pretty(table)?),
        ("slice_deltas.csv", deltas_csv(table)),
        ("slice_deltas.json", serde_json::to_string_pretty(&table.deltas)?),
    ];
    let mut written = Vec::new();
    for (name, body) in files {
        let path = out.join(name);
        fs::write(&path, body)?;
        written.push(path);
    }
    Ok(written)
}

pub fn eval(config: &Path, out: &Path) -> CmdResult<Vec<PathBuf>> {
    let (_, ws) = open_workspace(config)?;
    let service = Service::new(ws, ServiceOptions::default())?;
    write_table(&service.state().table, out)
}

pub fn diff(config: &Path, query: &str, a: &str, b: &str, columns: &[String]) -> CmdResult<SideBySide> {
    let (_, ws) = open_workspace(config)?;
    let service = Service::new(ws, ServiceOptions::default())?;
    Ok(service.side_by_side("cli", query, a, b, columns)?)
}

/// Plain-text rendering of a side-by-side view, in `a`'s order.
pub fn render_diff(view: &SideBySide) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "query {} ({} vs {})", view.query_id, view.a.model, view.b.model);
    let _ = writeln!(out, "{:>6} {:>6} {:>5}  {:<28} {:>10} {:>10}", "rank_a", "rank_b", "move", "item", "score_a", "score_b");
    for (m, item) in view.diff.items.iter().zip(&view.a.items) {
        let score_b = view.b.items.iter().find(|i| i.item_id == m.item_id).map(|i| i.score).unwrap_or(f64::NAN);
        let _ = writeln!(
            out,
            "{:>6} {:>6} {:>+5}  {:<28} {:>10.4} {:>10.4}",
            m.rank_a, m.rank_b, m.movement, m.item_id, item.score, score_b
        );
    }
    out
}

pub struct AnalyzeOutput {
    pub metrics: SessionMetrics,
    pub metrics_path: PathBuf,
    pub records_path: PathBuf,
}

/// Writes `out` (metrics JSON) and a per-event classification CSV next to it.
pub fn analyze(log: &Path, anecdotes: &[String], out: &Path, records: Option<&Path>) -> CmdResult<AnalyzeOutput> {
    let events = read_events(BufReader::new(File::open(log)?))?;
    if events.is_empty() {
        return Err(AnalysisError::EmptySession.into());
    }
    let recs = classify_log(&events, anecdotes);
    let metrics = measures(&recs);
    let records_path = match records {
        Some(p) => p.to_path_buf(),
        None => {
            let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("metrics");
            out.with_file_name(format!("{stem}_events.csv"))
        }
    };
    for p in [out, records_path.as_path()] {
        if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(out, serde_json::to_string_pretty(&metrics)?)?;
    fs::write(&records_path, records_to_csv(&recs))?;
    Ok(AnalyzeOutput { metrics, metrics_path: out.to_path_buf(), records_path })
}

/// Replays an event log against the config and writes the resulting table.
pub fn replay(config: &Path, log: &Path, out: &Path) -> CmdResult<(u64, Vec<PathBuf>)> {
    let (_, ws) = open_workspace(config)?;
    let events = read_events(BufReader::new(File::open(log)?))?;
    let state = replay_state(ws, &events)?;
    let mut files = write_table(&state.table, out)?;
    let snapshot = out.join("snapshot.json");
    fs::write(&snapshot, serde_json::to_string_pretty(&state.workspace.export_snapshot())?)?;
    files.push(snapshot);
    Ok((state.workspace.revision(), files))
}

pub fn gen_fixture(out: &Path, queries: usize, items: usize, seed: u64) -> CmdResult<PathBuf> {
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(out, fixture::esci_csv(queries, items, seed))?;
    Ok(out.to_path_buf())
}

pub fn metrics_json(m: &SessionMetrics) -> serde_json::Value {
    json!(m)
}
