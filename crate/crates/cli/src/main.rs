use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use convsearch_cli::commands::{self, TuneInputs};
use convsearch_cli::service::{self, AppState};
use convsearch_cli::stub;
use convsearch_core::tuner::{Phase3Target, TuneOptions};
use convsearch_core::{Metric, Pipeline};
use tokio::net::TcpListener;

#[derive(Parser)]
#[command(name = "convsearch", version, about = "Conversational passage search")]
struct Cli {
    /// Print every turn's expansion terms with their provenance.
    #[arg(long, global = true)]
    explain: bool,

    /// Pronoun list gating feedback expansion, one word per line.
    #[arg(long, global = true, value_name = "FILE")]
    pronouns: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Phase3 {
    Qt,
    Qs,
}

#[derive(Subcommand)]
enum Command {
    /// Build an index from a JSON-lines collection of {"id", "contents"}.
    Index {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Run topics through the pipeline and write a TREC run file.
    Run {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        topics: PathBuf,
        /// Pipeline config, TOML or JSON. Defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Score a run file against qrels.
    Eval {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        qrels: PathBuf,
        /// Lowest grade counted as relevant by AP and P@k.
        #[arg(long, default_value_t = 1)]
        threshold: u32,
    },
    /// Line-search the HQE cutoffs on training topics.
    Tune {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        topics: PathBuf,
        #[arg(long)]
        qrels: PathBuf,
        /// JSON candidate lists: {"q_s": [...], "q_t": [...], "theta": [...]}.
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "ndcg@3", value_parser = parse_metric)]
        metric: Metric,
        /// Parameter tuned in the last phase.
        #[arg(long, value_enum, default_value = "qt")]
        phase3: Phase3,
        /// Write the tuned pipeline config here.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Also print the full result as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Serve the HTTP session API.
    Serve {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, env = "CONVSEARCH_PORT", default_value_t = 8080)]
        port: u16,
        /// Seconds a session may stay idle before it is dropped.
        #[arg(long, default_value_t = service::DEFAULT_TTL.as_secs())]
        session_ttl: u64,
    },
    /// Serve the deterministic stub model (upper-case rewrite, reversed rerank).
    StubModel {
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8081)]
        port: u16,
    },
}

fn parse_metric(s: &str) -> Result<Metric, String> {
    s.parse().map_err(|e: convsearch_core::Error| e.to_string())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .json()
        .with_writer(std::io::stderr)
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    Ok(tokio::runtime::Builder::new_multi_thread().enable_all().build()?)
}

async fn bind(host: &str, port: u16) -> Result<TcpListener> {
    TcpListener::bind((host, port))
        .await
        .with_context(|| format!("binding {host}:{port}"))
}

fn dispatch(cli: Cli) -> Result<()> {
    let pronouns = cli.pronouns.as_deref();
    let mut stdout = std::io::stdout().lock();
    match cli.command {
        Command::Index { input, output } => {
            let s = commands::build(&input, &output)?;
            println!(
                "indexed {} documents, {} terms, average length {:.2}",
                s.documents, s.terms, s.avg_doc_len
            );
        }
        Command::Run {
            index,
            topics,
            config,
            output,
        } => {
            let cfg = commands::load_config(config.as_deref(), pronouns)?;
            let index = commands::load_index(&index)?;
            let run = commands::run(&index, &topics, cfg, &output, cli.explain, &mut stdout)?;
            tracing::info!(lines = run.entries.len(), output = %output.display(), "run written");
        }
        Command::Eval { run, qrels, threshold } => {
            let report = commands::eval(&run, &qrels, threshold)?;
            print!("{}", report.to_table());
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Tune {
            index,
            topics,
            qrels,
            space,
            config,
            metric,
            phase3,
            output,
            json,
        } => {
            let base = commands::load_config(config.as_deref(), pronouns)?;
            let index = commands::load_index(&index)?;
            let options = TuneOptions {
                metric,
                phase3: match phase3 {
                    Phase3::Qt => Phase3Target::Qt,
                    Phase3::Qs => Phase3Target::Qs,
                },
            };
            let inputs = TuneInputs {
                index: &index,
                topics: &topics,
                qrels: &qrels,
                space: &space,
            };
            let result = commands::tune(inputs, &base, options)?;
            print!("{}", commands::tune_table(&result));
            if json {
                println!("{}", serde_json::to_string_pretty(&result)?);
            }
            if let Some(path) = output {
                let tuned = convsearch_core::PipelineConfig {
                    hqe: result.hqe,
                    bm25: result.bm25,
                    ..base
                };
                tuned.save(&path)?;
            }
        }
        Command::Serve {
            index,
            config,
            host,
            port,
            session_ttl,
        } => {
            let cfg = commands::load_config(config.as_deref(), pronouns)?;
            let index = commands::load_index(&index)?;
            let state =
                AppState::new(index, Pipeline::new(cfg)?, Duration::from_secs(session_ttl)).with_explain(cli.explain);
            let state = Arc::new(state);
            runtime()?.block_on(async {
                let listener = bind(&host, port).await?;
                tracing::info!(addr = %listener.local_addr()?, "serving");
                service::spawn_evictor(state.clone());
                convsearch_cli::serve(listener, service::router(state)).await?;
                Ok::<_, anyhow::Error>(())
            })?;
        }
        Command::StubModel { host, port } => {
            runtime()?.block_on(async {
                let listener = bind(&host, port).await?;
                tracing::info!(addr = %listener.local_addr()?, "stub model serving");
                convsearch_cli::serve(listener, stub::router()).await?;
                Ok::<_, anyhow::Error>(())
            })?;
        }
    }
    Ok(())
}
