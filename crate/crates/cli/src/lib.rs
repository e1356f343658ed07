//! Config-driven runner for the `svsmooth` experiments.
//!
//! One config file describes one experiment. A run writes `<command>.csv`
//! with the tabular results and `<command>.meta.json` with the config echo,
//! seed, versions, wall time and truncation flag.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiment;
pub mod output;

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde_json::json;
use svsmooth_core::runner::Executor;
use svsmooth_core::tail::McSettings;

pub use config::{Diagnostic, RawConfig};
pub use experiment::{validate, Command, ExperimentConfig, Outcome};

/// Environment variable capping the runtime of Monte Carlo loops, in seconds.
pub const BUDGET_ENV: &str = "SVSMOOTH_BUDGET_SECONDS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid config:\n{}", .0.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n"))]
    Config(Vec<Diagnostic>),
    #[error(transparent)]
    Core(#[from] svsmooth_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker count; `None` uses every available core.
    pub workers: Option<usize>,
    /// Overrides the config's `seed`.
    pub seed: Option<u64>,
    /// Overrides the config's `out`.
    pub out: Option<PathBuf>,
    pub budget: Option<Duration>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub csv_path: PathBuf,
    pub meta_path: PathBuf,
    pub outcome: Outcome,
}

impl RunReport {
    /// 0 on success, 2 when a built-in check fails.
    pub fn exit_code(&self) -> i32 {
        match &self.outcome.check {
            Some(c) if !c.passed => 2,
            _ => 0,
        }
    }
}

/// Reads the budget from [`BUDGET_ENV`]; malformed values are a usage error.
pub fn budget_from_env() -> Result<Option<Duration>, CliError> {
    match std::env::var(BUDGET_ENV) {
        Ok(v) => {
            let secs: f64 = v
                .trim()
                .parse()
                .ok()
                .filter(|s: &f64| *s >= 0.0 && s.is_finite())
                .ok_or_else(|| CliError::Usage(format!("{BUDGET_ENV} must be a number of seconds, got `{v}`")))?;
            Ok(Some(Duration::from_secs_f64(secs)))
        }
        Err(_) => Ok(None),
    }
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

/// Validates, runs and writes the outputs of one experiment.
pub fn run(mut raw: RawConfig, opts: &RunOptions) -> Result<RunReport, CliError> {
    if let Some(seed) = opts.seed {
        raw.set("seed", seed.to_string());
    }
    let cfg = ExperimentConfig::from_raw(&raw).map_err(CliError::Config)?;
    // The echo pins the seed so a rerun from it needs no flags.
    raw.set("seed", cfg.master_seed.to_string());

    let start = Instant::now();
    let executor = match opts.workers {
        Some(w) => Executor::new(w)?,
        None => Executor::available(),
    };
    let workers = executor.workers();
    let executor = executor.with_deadline(opts.budget.map(|b| start + b));
    let mc = McSettings::new(cfg.confidence, executor)?;
    let outcome = cfg.run(&mc)?;
    let wall = start.elapsed().as_secs_f64();

    let dir = opts.out.clone().or(cfg.output_path.clone()).unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|source| CliError::Io { path: dir.clone(), source })?;
    let csv_path = dir.join(format!("{}.csv", cfg.command));
    let meta_path = dir.join(format!("{}.meta.json", cfg.command));
    write(&csv_path, &outcome.table.to_csv())?;
    let meta = json!({
        "command": cfg.command.name(),
        "config": raw.entries,
        "master_seed": cfg.master_seed,
        "trials": cfg.trials,
        "confidence": cfg.confidence,
        "versions": {
            "svsmooth-cli": env!("CARGO_PKG_VERSION"),
        },
        "workers": workers,
        "wall_time_seconds": wall,
        "truncated": outcome.truncated,
        "check": outcome.check.as_ref().map(|c| json!({ "passed": c.passed, "detail": c.detail })),
        "summary": outcome.summary,
    });
    let text = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    write(&meta_path, &(text + "\n"))?;
    Ok(RunReport { csv_path, meta_path, outcome })
}
