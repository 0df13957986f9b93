//! Experiment runner for `uaplab-core`: JSON configs in, result JSON and
//! CSV tables out.

pub mod commands;
pub mod config;
mod error;
pub mod output;
pub mod suites;
pub mod targets;

#[cfg(test)]
mod api_tests;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::Value;

pub use config::ExperimentConfig;
pub use error::{CliError, FieldError, Result};
use output::{ensure_dir, pretty, result_path, write_file, Outcome, ResultDoc};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, clap::ValueEnum)]
pub enum Command {
    CheckActivation,
    Escape,
    TransitivityDemo,
    ConstrainedFit,
    OmegaApprox,
    RateSweep,
    LimitationDemo,
    FreeSpaceTests,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::CheckActivation,
        Command::Escape,
        Command::TransitivityDemo,
        Command::ConstrainedFit,
        Command::OmegaApprox,
        Command::RateSweep,
        Command::LimitationDemo,
        Command::FreeSpaceTests,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::CheckActivation => "check-activation",
            Command::Escape => "escape",
            Command::TransitivityDemo => "transitivity-demo",
            Command::ConstrainedFit => "constrained-fit",
            Command::OmegaApprox => "omega-approx",
            Command::RateSweep => "rate-sweep",
            Command::LimitationDemo => "limitation-demo",
            Command::FreeSpaceTests => "free-space-tests",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }
}

/// Paths written by one run.
#[derive(Debug, Clone)]
pub struct RunFiles {
    pub result: PathBuf,
    pub tables: Vec<PathBuf>,
    pub artifacts: Vec<PathBuf>,
}

/// Runs `cfg` and returns the outcome without touching the filesystem.
pub fn execute(cfg: &ExperimentConfig) -> Result<Outcome> {
    commands::run(cfg.command, &cfg.params, cfg.seed)
}

/// Runs `cfg` and writes `<command>.result.json`, one CSV per table and one
/// JSON file per artifact into `out_dir`.
pub fn run_and_write(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunFiles> {
    let start = Instant::now();
    let outcome = execute(cfg)?;
    let wall_time_ms = start.elapsed().as_millis() as u64;
    ensure_dir(out_dir)?;
    let name = cfg.command.name();

    let mut tables = Vec::new();
    for t in &outcome.tables {
        let path = out_dir.join(format!("{name}.{}.csv", t.name));
        write_file(&path, t.to_csv().as_bytes())?;
        tables.push(path);
    }
    let mut artifacts = Vec::new();
    for (label, v) in &outcome.artifacts {
        let path = out_dir.join(format!("{name}.{label}.json"));
        write_file(&path, &pretty(v))?;
        artifacts.push(path);
    }
    let file_name = |p: &PathBuf| p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let hash = cfg.hash();
    let inputs = Value::Object(cfg.params.clone());
    let doc = ResultDoc {
        status: "ok",
        command: name,
        config_hash: &hash,
        seed: cfg.seed,
        inputs: &inputs,
        outputs: &outcome.outputs,
        tables: tables.iter().map(file_name).collect(),
        artifacts: artifacts.iter().map(file_name).collect(),
        wall_time_ms,
    };
    let result = result_path(out_dir, name);
    write_file(&result, &pretty(&doc))?;
    Ok(RunFiles { result, tables, artifacts })
}
