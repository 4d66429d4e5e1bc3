//! `orbital-floquet <command> --config <file> [--out <dir>] [--seed <u64>] [--threads <n>]`
//!
//! Exit status: 0 on success, 1 for configuration or I/O problems, 2 when a
//! numerical routine fails. Failures print one JSON error record to stderr.

mod config;
mod run;
mod table;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use serde_json::json;

use config::{Command, ConfigError, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "orbital-floquet",
    version,
    about = "Driven orbital-doublet simulations"
)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// JSON run configuration; omitted fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides output.path).
    #[arg(long)]
    out: Option<String>,
    /// Random seed (overrides the config seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, env = "OF_THREADS")]
    threads: Option<usize>,
}

enum Failure {
    Config(String),
    Io(String),
    Numerical(String),
}

impl Failure {
    fn report(&self) -> ExitCode {
        let (kind, message, code) = match self {
            Failure::Config(m) => ("config", m, 1),
            Failure::Io(m) => ("io", m, 1),
            Failure::Numerical(m) => ("numerical", m, 2),
        };
        eprintln!(
            "{}",
            json!({ "error": { "kind": kind, "message": message } })
        );
        ExitCode::from(code)
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

fn io_failure(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::Io(format!("{}: {e}", path.display()))
}

fn execute(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Config("threads: must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(format!("threads: {e}")))?;
    }
    let raw = match &cli.config {
        Some(path) => config::load(path)?,
        None => RunConfig::default(),
    };
    let resolved = raw.resolve(cli.command, cli.seed, cli.out.as_deref())?;
    let dir = PathBuf::from(&resolved.out_dir);
    fs::create_dir_all(&dir).map_err(io_failure(&dir))?;

    let (tables, warnings) = run::run(&resolved).map_err(|e| Failure::Numerical(e.to_string()))?;
    for w in &warnings {
        eprintln!("{}", json!({ "warning": w }));
    }
    for t in &tables {
        t.write(&dir, resolved.format).map_err(io_failure(&dir))?;
    }
    let meta = dir.join(format!("{}.meta.json", cli.command.name()));
    let text =
        serde_json::to_string_pretty(&resolved.echo).map_err(|e| Failure::Io(e.to_string()))?;
    fs::write(&meta, text + "\n").map_err(io_failure(&meta))?;
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.report(),
    }
}
