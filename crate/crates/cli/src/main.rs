//! `ks`: reproducible experiment driver for the sub-critical Keller-Segel
//! toolkit.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical abort
//! (collision with the exact kernel, CFL violation).

mod csv;
mod error;
mod manifest;
mod runner;
mod spec;
mod strict_json;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use error::{CliError, Result};
use runner::RunOptions;

#[derive(Parser)]
#[command(name = "ks", version, about = "Sub-critical Keller-Segel experiment driver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON spec.
    Run {
        spec: PathBuf,
        /// Concurrent runs within the experiment (seeds). KS_DETERMINISTIC=1
        /// forces 1.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Output directory (overrides the spec's output_dir; default "out").
        #[arg(long)]
        out: Option<PathBuf>,
        /// Continue particle runs from existing trajectory checkpoints.
        #[arg(long)]
        resume: bool,
    },
    /// Parse and range-check a spec, printing the fully-defaulted form.
    Validate { spec: PathBuf },
    /// Describe a trajectory file (header, record count, truncation state).
    Inspect { file: PathBuf },
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run {
            spec,
            jobs,
            out,
            resume,
        } => cmd_run(&spec, jobs, out, resume),
        Command::Validate { spec } => cmd_validate(&spec),
        Command::Inspect { file } => cmd_inspect(&file),
    };
    if let Err(e) = outcome {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn read_spec(path: &PathBuf) -> Result<(String, spec::ResolvedSpec)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    let resolved = spec::validate_config(&text)?;
    Ok((text, resolved))
}

fn cmd_run(path: &PathBuf, jobs: usize, out: Option<PathBuf>, resume: bool) -> Result<()> {
    let (text, resolved) = read_spec(path)?;
    let raw: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Validation(e.to_string()))?;
    let spec_out = raw
        .get("output_dir")
        .and_then(|v| v.as_str())
        .map(PathBuf::from);
    let out_dir = out
        .or(spec_out)
        .unwrap_or_else(|| PathBuf::from("out"));

    let deterministic = std::env::var("KS_DETERMINISTIC").map(|v| v == "1").unwrap_or(false);
    let jobs = if deterministic { 1 } else { jobs.max(1) };

    let opts = RunOptions { jobs, resume };
    let manifest_path = runner::run_experiment(&resolved, &text, &out_dir, &opts)?;
    println!("manifest: {}", manifest_path.display());
    Ok(())
}

fn cmd_validate(path: &PathBuf) -> Result<()> {
    let (_, resolved) = read_spec(path)?;
    let pretty = serde_json::to_string_pretty(&resolved)
        .map_err(|e| CliError::Other(e.to_string()))?;
    println!("{pretty}");
    Ok(())
}

fn cmd_inspect(path: &PathBuf) -> Result<()> {
    let file = ks_core::particle::read_trajectory_partial(path)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let cfg = &file.config;
    println!("trajectory: {}", path.display());
    println!("  particles:        {}", cfg.n_particles);
    println!("  dt:               {}", cfg.dt);
    println!("  t_end:            {}", cfg.t_end);
    println!("  record_stride:    {}", cfg.record_stride);
    println!("  declared records: {}", file.declared_records);
    println!("  present records:  {}", file.states.len());
    if (file.states.len() as u64) < file.declared_records {
        let last_t = file.states.last().map(|s| s.time).unwrap_or(0.0);
        println!("  status:           truncated checkpoint, resumable from t = {last_t}");
    } else {
        println!("  status:           complete");
    }
    println!(
        "  config:           {}",
        serde_json::to_string(cfg).map_err(|e| CliError::Other(e.to_string()))?
    );
    Ok(())
}
