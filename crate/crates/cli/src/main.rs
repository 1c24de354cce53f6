use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};

use contractcheck_cli::service::{router, AppState, Store};
use contractcheck_cli::{analyze_document, exit_code, parse_kinds, render, write_outputs, CliError, Format};
use contractcheck_core::{AnalysisOptions, SolverConfig};

#[derive(Parser)]
#[command(name = "contractcheck", version, about = "Consistency analysis of share purchase agreements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct SolverArgs {
    /// Solver executable (default: $CONTRACTCHECK_SOLVER or z3).
    #[arg(long)]
    solver: Option<PathBuf>,
    /// Per-instance timeout in seconds.
    #[arg(long, default_value_t = 10.0)]
    timeout: f64,
    /// Concurrent solver processes.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze a block document.
    Analyze {
        path: PathBuf,
        /// all, or a comma-separated list of I, II, unsat, defense, limitation.
        #[arg(long, default_value = "all")]
        analysis: String,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        /// Also write report.json, report.txt and diagrams to this directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Record solve times in the report.
        #[arg(long)]
        timings: bool,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        #[arg(long, default_value = "contracts")]
        store: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
    },
}

fn options(args: &SolverArgs) -> Result<AnalysisOptions, String> {
    if !(args.timeout.is_finite() && args.timeout > 0.0) {
        return Err("--timeout must be a positive number of seconds".into());
    }
    let mut solver = SolverConfig::default();
    if let Some(exe) = &args.solver {
        solver = solver.with_executable(exe);
    }
    solver = solver.with_timeout(Duration::from_secs_f64(args.timeout)).map_err(|e| e.to_string())?;
    let mut opts = AnalysisOptions { solver, ..AnalysisOptions::default() };
    if let Some(w) = args.workers {
        opts.workers = w.max(1);
    }
    Ok(opts)
}

fn analyze(path: PathBuf, analysis: String, format: Format, out: Option<PathBuf>, timings: bool, solver: SolverArgs) -> ExitCode {
    let mut opts = match options(&solver) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    opts.timings = timings;
    let result = (|| -> Result<_, CliError> {
        opts.kinds = parse_kinds(&analysis)?;
        let document = std::fs::read_to_string(&path)
            .map_err(|source| CliError::Read { path: path.display().to_string(), source })?;
        let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "contract".into());
        let report = analyze_document(&id, &document, &opts)?;
        if let Some(dir) = &out {
            write_outputs(&report, dir)?;
        }
        Ok(report)
    })();
    match result {
        Ok(report) => {
            print!("{}", render(&report, format));
            for e in &report.errors {
                eprintln!("error: {e}");
            }
            for a in report.analyses.iter().filter(|a| a.detail.is_some() && a.verdict == "error") {
                eprintln!("solver error in {}: {}", a.instance, a.detail.as_deref().unwrap_or_default());
            }
            ExitCode::from(exit_code(&report))
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

async fn serve(addr: SocketAddr, store: PathBuf, solver: SolverArgs) -> Result<(), String> {
    let opts = options(&solver)?;
    let store = Store::open(&store).map_err(|e| format!("cannot open store {}: {e}", store.display()))?;
    let app = router(AppState::new(store, opts));
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| format!("cannot bind {addr}: {e}"))?;
    eprintln!("listening on http://{addr}");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Analyze { path, analysis, format, out, timings, solver } => {
            analyze(path, analysis, format, out, timings, solver)
        }
        Command::Serve { addr, store, solver } => {
            let runtime = tokio::runtime::Runtime::new().expect("tokio runtime");
            match runtime.block_on(serve(addr, store, solver)) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
    }
}
