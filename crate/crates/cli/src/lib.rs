//! Command-line front end: TOML scenarios in, CSV and JSON out.
//!
//! Exit codes: 0 ok, 1 a hypothesis or criterion failed, 2 configuration
//! error, 3 solver or CG failure (including file output errors).

pub mod commands;
pub mod config;

use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use raonakra_core::{AnalysisError, HumError, ModelError, SimError};

pub use config::ScenarioConfig;

/// Environment variable that overrides the output directory of the config file.
pub const OUT_ENV: &str = "RAONAKRA_OUT";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("criterion failed: {0}")]
    Criterion(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Criterion(_) => 1,
            CliError::Config(_) => 2,
            CliError::Solver(_) | CliError::Io(_) => 3,
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::NonFinite { .. } | SimError::Delay(_) => CliError::Solver(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::WrongVariant => CliError::Config(e.to_string()),
            _ => CliError::Solver(e.to_string()),
        }
    }
}

impl From<HumError> for CliError {
    fn from(e: HumError) -> Self {
        match e {
            HumError::Sim(s) => s.into(),
            HumError::WrongVariant | HumError::Grid(_) => CliError::Config(e.to_string()),
            HumError::Verification { .. } => CliError::Criterion(e.to_string()),
            _ => CliError::Solver(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Validate,
    Simulate,
    DecayReport,
    Hum,
    Observability,
    Convergence,
}

#[derive(Debug, Clone, Parser)]
#[command(name = "raonakra", version, about = "Rao-Nakra sandwich beam laboratory")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// Scenario file (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; beats the config file and the environment.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed for every random preset in the scenario.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Keep every K-th state in trajectory output.
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long)]
    pub quiet: bool,
}

/// What a command produced before anything touches the disk.
pub struct Outcome {
    pub pass: bool,
    pub summary: String,
    pub invariants: serde_json::Value,
    pub files: Vec<(String, String)>,
}

#[derive(Debug, Serialize)]
struct Overrides {
    seed: Option<u64>,
    stride: Option<usize>,
    out: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    tool: &'static str,
    cli_version: &'static str,
    core_version: &'static str,
    command: Command,
    config_sha256: String,
    overrides: Overrides,
    status: &'static str,
    exit_code: i32,
    error: Option<String>,
    invariants: serde_json::Value,
    files: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn resolve_out(cli: &Cli, cfg: &ScenarioConfig) -> PathBuf {
    if let Some(o) = &cli.out {
        return o.clone();
    }
    match std::env::var_os(OUT_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from(&cfg.output.dir),
    }
}

fn write_all(dir: &Path, files: &[(String, String)]) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    for (name, body) in files {
        std::fs::write(dir.join(name), body)?;
    }
    Ok(())
}

/// Parses, runs and writes; returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let text = match std::fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read {}: {e}", cli.config.display());
            return 2;
        }
    };
    let mut cfg = match ScenarioConfig::parse(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return e.exit_code();
        }
    };
    if let Some(seed) = cli.seed {
        cfg.override_seed(seed);
    }
    if let Some(stride) = cli.stride {
        cfg.scheme.stride = stride;
    }
    let out = resolve_out(cli, &cfg);
    let result = commands::dispatch(cli.command, &cfg);
    let (status, code, error, outcome) = match result {
        Ok(o) if o.pass => ("ok", 0, None, Some(o)),
        Ok(o) => ("criterion-failed", 1, None, Some(o)),
        Err(e) => ("failed", e.exit_code(), Some(e.to_string()), None),
    };
    // configuration errors leave no trace on disk
    if code == 2 {
        eprintln!("{}", error.unwrap_or_default());
        return 2;
    }
    let (invariants, mut files, summary) = match outcome {
        Some(o) => (o.invariants, o.files, o.summary),
        None => (serde_json::Value::Null, Vec::new(), String::new()),
    };
    let manifest = Manifest {
        tool: "raonakra",
        cli_version: env!("CARGO_PKG_VERSION"),
        core_version: raonakra_core::VERSION,
        command: cli.command,
        config_sha256: sha256_hex(text.as_bytes()),
        overrides: Overrides {
            seed: cli.seed,
            stride: cli.stride,
            out: cli.out.as_ref().map(|p| p.display().to_string()),
        },
        status,
        exit_code: code,
        error: error.clone(),
        invariants,
        files: files.iter().map(|(n, _)| n.clone()).collect(),
    };
    let body = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    files.push(("manifest.json".into(), body));
    if let Err(e) = write_all(&out, &files) {
        eprintln!("{e}");
        return e.exit_code();
    }
    if let Some(e) = error {
        eprintln!("{e}");
    } else if !cli.quiet {
        println!("{summary}");
        println!("wrote {} files to {}", files.len(), out.display());
    }
    code
}
