//! Command-line front end: `gharnack run <command> <config.json>`.
//!
//! Exit status is 0 when every pass flag of the report holds, 1 on a
//! numerical failure (the error is recorded in `report.json`) and 2 on a
//! configuration or I/O error.

pub mod commands;
pub mod config;
pub mod report;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use thiserror::Error;

pub use commands::Command;
pub use config::ExperimentConfig;

#[derive(Debug, Parser)]
#[command(name = "gharnack", version, about = "G-SDE coupling and Harnack inequality laboratory")]
pub struct Cli {
    #[command(subcommand)]
    pub action: Action,
}

#[derive(Debug, Subcommand)]
pub enum Action {
    /// Run one experiment and write report.json.
    Run(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub command: Command,
    /// Experiment configuration (JSON).
    pub config_file: Option<PathBuf>,
    #[arg(long = "config", value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,
    /// Override `run.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override `run.n_paths`.
    #[arg(long)]
    pub paths: Option<usize>,
    /// Write CSV dumps (`paths.csv` for simulate, `grid.csv` for hjb).
    #[arg(long)]
    pub csv: bool,
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }
}

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Read, validate and apply command-line overrides.
pub fn load_config(args: &RunArgs) -> Result<ExperimentConfig, CliError> {
    let path = match (&args.config_file, &args.config) {
        (Some(a), Some(b)) if a != b => {
            return Err(CliError::Config(format!(
                "config given twice ({} and {})",
                a.display(),
                b.display()
            )))
        }
        (Some(p), _) | (None, Some(p)) => p,
        (None, None) => return Err(CliError::Config("no config file given".into())),
    };
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut cfg: ExperimentConfig =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if let Some(seed) = args.seed {
        cfg.run.seed = seed;
    }
    if let Some(n) = args.paths {
        cfg.run.n_paths = n;
    }
    cfg.validate().map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(cfg)
}

/// Execute `args` and return the process exit status.
pub fn run(args: &RunArgs) -> i32 {
    match run_inner(args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("gharnack: {e}");
            EXIT_CONFIG
        }
    }
}

fn run_inner(args: &RunArgs) -> Result<i32, CliError> {
    let cfg = load_config(args)?;
    fs::create_dir_all(&args.out).map_err(|e| CliError::io(&args.out, e))?;
    let config_echo = serde_json::to_value(&cfg).expect("config serializes");
    let outcome = commands::execute(args.command, &cfg, args.csv);
    let timestamp = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
    let (report, code) = match outcome {
        Ok(out) => {
            for (name, contents) in &out.csv {
                let p = args.out.join(name);
                fs::write(&p, contents).map_err(|e| CliError::io(&p, e))?;
            }
            if !args.quiet {
                println!("{}", out.summary);
                println!("{}: {}", args.command.name(), if out.pass { "PASS" } else { "FAIL" });
            }
            let code = if out.pass { EXIT_PASS } else { EXIT_FAIL };
            (report::assemble(args.command.name(), config_echo, out.results, &out.fitted, out.pass, &timestamp), code)
        }
        Err(e) => {
            eprintln!("gharnack: {} failed: {e}", args.command.name());
            let results = json!({ "error": e.to_string() });
            let fitted = report::FittedMap::new();
            (report::assemble(args.command.name(), config_echo, results, &fitted, false, &timestamp), EXIT_FAIL)
        }
    };
    let p = args.out.join("report.json");
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    fs::write(&p, text + "\n").map_err(|e| CliError::io(&p, e))?;
    Ok(code)
}
