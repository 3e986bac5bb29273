//! `kgvar`: runs one experiment from a config file and writes
//! `report.json`, `summary.csv` and plot-ready `.dat` tables.
//!
//! Exit status: 0 success, 1 a check or positivity verdict failed, 2 bad
//! configuration, 3 numerical or I/O failure. Failures print a one-line JSON
//! record on stderr.

mod commands;
mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use serde_json::json;

use config::{Command, Overrides};

#[derive(Debug, Parser)]
#[command(name = "kgvar", version, about = "Variable-mass Klein-Gordon experiments")]
struct Cli {
    /// Experiment to run.
    #[arg(value_enum)]
    command: Command,

    /// TOML file; keys under `[<command>]` set parameters.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    #[arg(long, value_name = "N")]
    seed: Option<u64>,

    /// Output directory (default `kgvar-<command>`).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,

    #[arg(long, value_name = "X")]
    tolerance: Option<f64>,

    /// Worker threads for the parallel loops.
    #[arg(long, value_name = "N")]
    threads: Option<usize>,

    /// Parameter override, repeatable; the value is read as a TOML literal
    /// (`--set zeta=[0.1,0,0,0] --set kernel=noisy_feynman`).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Print the resolved configuration and exit without running.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Config,
    Numerical,
    Io,
}

#[derive(Debug)]
pub struct Failure {
    kind: Kind,
    message: String,
}

impl Failure {
    pub fn config(m: impl Into<String>) -> Self {
        Failure { kind: Kind::Config, message: m.into() }
    }

    pub fn numerical(m: impl Into<String>) -> Self {
        Failure { kind: Kind::Numerical, message: m.into() }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Failure { kind: Kind::Io, message: format!("{}: {e}", path.display()) }
    }

    /// Core errors met while validating are always configuration errors.
    pub fn from_config(e: kgvar::Error) -> Self {
        Failure::config(e.to_string())
    }

    fn code(&self) -> u8 {
        match self.kind {
            Kind::Config => 2,
            Kind::Numerical | Kind::Io => 3,
        }
    }
}

impl From<kgvar::Error> for Failure {
    fn from(e: kgvar::Error) -> Self {
        match e {
            kgvar::Error::Numerical(_) => Failure::numerical(e.to_string()),
            _ => Failure::config(e.to_string()),
        }
    }
}

fn run(cli: Cli) -> Result<bool, Failure> {
    let overrides = Overrides {
        config: cli.config,
        seed: cli.seed,
        tolerance: cli.tolerance,
        out: cli.out,
        threads: cli.threads,
        set: cli.set,
    };
    let resolved = config::resolve(cli.command, &overrides)?;
    if cli.dry_run {
        let s = serde_json::to_string_pretty(&resolved.params).map_err(|e| Failure::numerical(e.to_string()))?;
        println!("{s}");
        return Ok(true);
    }
    if let Some(n) = resolved.env.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::config(format!("thread pool: {e}")))?;
    }
    let done = commands::run(&resolved.params)?;
    output::write_all(&resolved.env.out, cli.command.name(), &resolved.params, &done.outputs)?;
    println!("{} {}: {}", if done.passed { "ok" } else { "FAILED" }, cli.command.name(), done.line);
    println!("wrote {}", resolved.env.out.display());
    Ok(done.passed)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            let record = json!({ "error": { "kind": "config", "exit_code": 2, "message": e.to_string().trim() } });
            eprintln!("{e}");
            eprintln!("{record}");
            return ExitCode::from(2);
        }
        Err(e) => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) => {
            let kind = match f.kind {
                Kind::Config => "config",
                Kind::Numerical => "numerical",
                Kind::Io => "io",
            };
            eprintln!("{}", json!({ "error": { "kind": kind, "exit_code": f.code(), "message": f.message } }));
            ExitCode::from(f.code())
        }
    }
}
