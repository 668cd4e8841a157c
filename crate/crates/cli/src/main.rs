use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};

use tradeoff_cli::{api, commands};
use tradeoff_core::fixture::{FIXTURE_ITEMS, FIXTURE_QUERIES, FIXTURE_SEED};
use tradeoff_core::service::{Service, ServiceOptions, TelemetryDir};

#[derive(Parser)]
#[command(name = "tradeoff", version, about = "Design and evaluate multi-objective rankers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve the workspace over HTTP.
    Serve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Directory for per-actor JSONL session logs.
        #[arg(long, default_value = "telemetry")]
        telemetry_dir: PathBuf,
    },
    /// Write the metric table and per-slice deltas as CSV and JSON.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare two models' rankings of one query.
    Diff {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        query: String,
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        /// Emit the full side-by-side view as JSON.
        #[arg(long)]
        json: bool,
        /// Feature columns to include (comma-separated).
        #[arg(long, value_delimiter = ',')]
        columns: Vec<String>,
    },
    /// Classify a session log and compute M1-M5.
    Analyze {
        #[arg(long)]
        log: PathBuf,
        /// Anecdote query ids (comma-separated).
        #[arg(long, value_delimiter = ',', default_value = "")]
        anecdotes: Vec<String>,
        /// Read anecdote ids from a workspace config instead.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Per-event classification CSV; defaults to `<out stem>_events.csv`.
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Replay a session log against the config and write the final table.
    Replay {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate the synthetic ESCI-style dataset.
    GenFixture {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = FIXTURE_QUERIES)]
        queries: usize,
        #[arg(long, default_value_t = FIXTURE_ITEMS)]
        items: usize,
        #[arg(long, default_value_t = FIXTURE_SEED)]
        seed: u64,
    },
}

fn run(cli: Cli) -> commands::CmdResult<()> {
    match cli.command {
        Command::Serve { config, port, host, telemetry_dir } => {
            let (_, ws) = commands::open_workspace(&config)?;
            let telemetry = TelemetryDir::new(&telemetry_dir)?;
            let service = Arc::new(Service::new(ws, ServiceOptions { telemetry: Some(telemetry), clock: None })?);
            let addr: SocketAddr = format!("{host}:{port}").parse()?;
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::bind(addr).await?;
                log::info!("serving {} on http://{addr}", config.display());
                axum::serve(listener, api::router(service))
                    .with_graceful_shutdown(async {
                        let _ = tokio::signal::ctrl_c().await;
                    })
                    .await
            })?;
        }
        Command::Eval { config, out } => {
            for p in commands::eval(&config, &out)? {
                println!("{}", p.display());
            }
        }
        Command::Diff { config, query, a, b, json, columns } => {
            let view = commands::diff(&config, &query, &a, &b, &columns)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&view)?);
            } else {
                print!("{}", commands::render_diff(&view));
            }
        }
        Command::Analyze { log, anecdotes, config, out, records } => {
            let mut anecdotes: Vec<String> = anecdotes.into_iter().filter(|a| !a.is_empty()).collect();
            if let Some(config) = config {
                anecdotes.extend(tradeoff_core::service::WorkspaceConfig::load(&config)?.anecdotes);
            }
            let result = commands::analyze(&log, &anecdotes, &out, records.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&commands::metrics_json(&result.metrics))?);
            eprintln!("wrote {} and {}", result.metrics_path.display(), result.records_path.display());
        }
        Command::Replay { config, log, out } => {
            let (revision, files) = commands::replay(&config, &log, &out)?;
            println!("revision {revision}");
            for p in files {
                println!("{}", p.display());
            }
        }
        Command::GenFixture { out, queries, items, seed } => {
            println!("{}", commands::gen_fixture(&out, queries, items, seed)?.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
