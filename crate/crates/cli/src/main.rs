use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use svsmooth_cli::{budget_from_env, run, CliError, RawConfig, RunOptions};

/// Run one smallest-singular-value experiment from a config file.
///
/// The config is a flat `key = value` file, or the `.meta.json` of an earlier
/// run. Results go to `<out>/<command>.csv` and `<out>/<command>.meta.json`.
/// Exit status: 0 on success, 2 when the experiment's check fails, 1 on errors.
#[derive(Debug, Parser)]
#[command(name = "svsmooth", version)]
struct Args {
    /// Experiment config.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Worker threads (default: available parallelism).
    #[arg(long, value_name = "N")]
    workers: Option<usize>,
    /// Output directory (overrides `out` in the config; default `.`).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Master seed (overrides `seed` in the config).
    #[arg(long, value_name = "S")]
    seed: Option<u64>,
    /// Only validate the config and print its diagnostics.
    #[arg(long)]
    check_config: bool,
}

fn main_inner(args: Args) -> Result<i32, CliError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|source| CliError::Io { path: args.config.clone(), source })?;
    let raw = RawConfig::parse(&text).map_err(CliError::Config)?;
    if args.check_config {
        let diags = svsmooth_cli::validate(&raw);
        if diags.is_empty() {
            println!("ok");
            return Ok(0);
        }
        return Err(CliError::Config(diags));
    }
    let opts = RunOptions { workers: args.workers, seed: args.seed, out: args.out, budget: budget_from_env()? };
    let report = run(raw, &opts)?;
    if report.outcome.truncated {
        eprintln!("warning: runtime budget reached; partial results written");
    }
    if let Some(check) = &report.outcome.check {
        eprintln!("check {}: {}", if check.passed { "passed" } else { "FAILED" }, check.detail);
    }
    println!("{}", report.csv_path.display());
    println!("{}", report.meta_path.display());
    Ok(report.exit_code())
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match main_inner(args) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
