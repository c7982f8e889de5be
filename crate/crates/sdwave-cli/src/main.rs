//! `sdwave` — convergence and structure experiments for a damped
//! stochastic wave equation, driven by a small key = value config file.
//!
//! Exit code 0 means the run completed and every built-in check passed;
//! any configuration, numerical, or check failure exits nonzero with a
//! message on stderr.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

/// Finite-element convergence studies for a strongly damped wave
/// equation with additive noise.
#[derive(Parser)]
#[command(name = "sdwave", version)]
struct Cli {
    /// Path to a key = value configuration file.
    config: PathBuf,

    /// Override the seed from the configuration file.
    #[arg(long)]
    seed: Option<u64>,

    /// Override the Monte-Carlo sample count (must be at least 1).
    #[arg(long)]
    samples: Option<usize>,

    /// Override the output directory.
    #[arg(long)]
    out_dir: Option<String>,

    /// Worker threads for sample-level parallelism (0 = one per core).
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

fn run(cli: &Cli) -> sdwave::Result<sdwave::runner::RunSummary> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| sdwave::Error::Config(format!("thread pool: {e}")))?;
    }
    let text = std::fs::read_to_string(&cli.config)?;
    let mut cfg = sdwave::config::parse_config(&text)?;
    cfg.apply_overrides(cli.seed, cli.samples, cli.out_dir.as_deref())?;
    sdwave::runner::run_command(&cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => {
            for line in &summary.lines {
                println!("{line}");
            }
            for file in &summary.files {
                println!("wrote {}", file.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
