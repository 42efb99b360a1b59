//! Command-line entry point.

use std::ffi::OsString;
use std::io::{BufRead, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use codegraph_agent::{Agent, AgentConfig, ChatBackend, ChatParams, HttpBackend, Preset, ScriptedBackend, Strategy};
use codegraph_core::indexer::{index_repository, IndexConfig};
use codegraph_core::query::{render_result, Caps};
use codegraph_core::store::{load_snapshot, save_snapshot, GraphHandle};

use crate::service::{router, Repo, ServiceState};
use crate::{run_query, Stats};

#[derive(Debug, Parser)]
#[command(name = "codegraph", version, about = "Index Python repositories into a code graph and query it")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Index a repository and write a snapshot.
    Index {
        path: PathBuf,
        /// Snapshot directory (default: <path>/.codegraph).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Glob of repository-relative paths to skip. Repeatable.
        #[arg(long)]
        exclude: Vec<String>,
        /// Skip test files and test directories.
        #[arg(long)]
        exclude_tests: bool,
    },
    /// Print node and edge counts of a snapshot.
    Stats {
        snapshot: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Run one graph query against a snapshot.
    Query {
        snapshot: PathBuf,
        query: String,
        #[arg(long)]
        limit: Option<usize>,
        #[arg(long)]
        json: bool,
    },
    /// Ask questions about a repository; one message per stdin line.
    Chat {
        snapshot: PathBuf,
        #[arg(long, default_value = "chat")]
        preset: String,
        #[arg(long)]
        strategy: Option<String>,
        /// Replay model replies from a JSON file instead of calling a model.
        #[arg(long)]
        script: Option<PathBuf>,
        #[arg(long)]
        max_rounds: Option<usize>,
        /// Write the session transcript as JSON lines.
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
    /// Serve the HTTP API over one or more snapshots.
    Serve {
        #[arg(required = true)]
        snapshots: Vec<PathBuf>,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long)]
        script: Option<PathBuf>,
        /// Directory of static files served at the root.
        #[arg(long)]
        static_dir: Option<PathBuf>,
        #[arg(long)]
        transcript_dir: Option<PathBuf>,
    },
}

/// Exit codes: 0 success, 1 usage error, 2 runtime failure.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let _ = tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_env("CODEGRAPH_LOG")
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .try_init();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Index { path, out, exclude, exclude_tests } => {
            let root = path.canonicalize().with_context(|| format!("cannot open {}", path.display()))?;
            let out = out.unwrap_or_else(|| root.join(".codegraph"));
            let config = IndexConfig { exclude_globs: exclude, exclude_tests, ..IndexConfig::default() };
            let (graph, report) = index_repository(&root, &config)?;
            save_snapshot(&graph, &out)?;
            println!("{report}");
            println!("snapshot written to {}", out.display());
        }
        Command::Stats { snapshot, json } => {
            let stats = Stats::of(&load(&snapshot)?);
            if json {
                println!("{}", serde_json::to_string_pretty(&stats)?);
            } else {
                println!("{stats}");
            }
        }
        Command::Query { snapshot, query, limit, json } => {
            if limit == Some(0) {
                bail!("--limit must be positive");
            }
            let handle = load(&snapshot)?;
            let root = source_root(&handle);
            let table = run_query(&handle, &query, limit, Caps::default(), Some(&root))?;
            if json {
                println!("{}", serde_json::to_string_pretty(&table)?);
            } else {
                println!("{}", render_result(&table, usize::MAX));
            }
        }
        Command::Chat { snapshot, preset, strategy, script, max_rounds, transcript } => {
            let handle = load(&snapshot)?;
            let (backend, params) = backend(script.as_deref())?;
            let preset: Preset = preset.parse()?;
            let mut config = AgentConfig::for_preset(preset);
            if let Some(s) = strategy {
                config.strategy = s.parse::<Strategy>()?;
            }
            if let Some(r) = max_rounds {
                config.max_rounds = r;
            }
            config.params = params;
            config.source_root = Some(source_root(&handle));
            let agent = Agent::new(handle, backend, config)?;
            let mut session = agent.new_session(uuid::Uuid::new_v4().to_string());
            let stdin = std::io::stdin();
            let mut out = std::io::stdout().lock();
            let mut result = Ok(());
            for line in stdin.lock().lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                match agent.send(&mut session, &line) {
                    Ok(outcome) => {
                        writeln!(out, "{}", outcome.answer)?;
                        out.flush()?;
                    }
                    Err(e) => {
                        result = Err(e.into());
                        break;
                    }
                }
            }
            if let Some(path) = transcript {
                std::fs::write(&path, session.transcript_jsonl())
                    .with_context(|| format!("cannot write {}", path.display()))?;
            }
            return result;
        }
        Command::Serve { snapshots, host, port, script, static_dir, transcript_dir } => {
            let backend = match (&script, std::env::var_os("CODEGRAPH_LLM_BASE_URL")) {
                (None, None) => None,
                _ => Some(backend(script.as_deref())?),
            };
            let (backend, params) = match backend {
                Some((b, p)) => (Some(b), p),
                None => (None, AgentConfig::default().params),
            };
            let mut state = ServiceState::new(backend, params);
            if let Some(dir) = transcript_dir {
                state = state.with_transcript_dir(dir);
            }
            for snap in &snapshots {
                let handle = load(snap)?;
                let name = snap
                    .canonicalize()
                    .ok()
                    .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
                    .unwrap_or_else(|| "repo".to_string());
                let source_root = source_root(&handle);
                let id = state.add_repo(&name, Repo { handle, source_root });
                tracing::info!(id, snapshot = %snap.display(), "loaded repository");
            }
            let addr: SocketAddr = format!("{host}:{port}").parse().context("invalid --host or --port")?;
            let app = router(Arc::new(state), static_dir.as_deref());
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::bind(addr).await.with_context(|| format!("cannot bind {addr}"))?;
                eprintln!("listening on http://{}", listener.local_addr()?);
                axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = tokio::signal::ctrl_c().await;
                    })
                    .await?;
                anyhow::Ok(())
            })?;
        }
    }
    Ok(())
}

fn load(snapshot: &Path) -> Result<GraphHandle> {
    load_snapshot(snapshot).with_context(|| format!("cannot load snapshot {}", snapshot.display()))
}

fn source_root(handle: &GraphHandle) -> PathBuf {
    PathBuf::from(&handle.graph().repo_root)
}

fn backend(script: Option<&Path>) -> Result<(Arc<dyn ChatBackend>, ChatParams)> {
    match script {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            let backend = ScriptedBackend::from_json(&text)?;
            Ok((Arc::new(backend), AgentConfig::default().params))
        }
        None => {
            let (backend, params) = HttpBackend::from_env()?;
            Ok((Arc::new(backend), params))
        }
    }
}
