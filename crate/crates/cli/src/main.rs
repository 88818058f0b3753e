use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Parser;

mod commands;
mod config;
mod output;
mod reproduce;

use commands::Effort;
use config::{Command, RunConfig};

/// Simulation, Floquet analysis and iSWAP calibration of a qubit pair whose
/// coupling is switched by a driven modulator qubit.
///
/// Frequencies and couplings are in units of the modulator frequency.
/// Exit status: 0 on success, 1 on error, 2 when `reproduce-paper`
/// completed but at least one check missed its tolerance.
#[derive(Debug, Parser)]
#[command(name = "freezegate", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,

    /// JSON run configuration; its `command` must match.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true)]
    steps_per_period: Option<usize>,

    /// Reduced resolution: 128 steps per period, no convergence check,
    /// smaller grids and budgets.
    #[arg(long, global = true)]
    quick: bool,
}

fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut run = match &cli.config {
        Some(path) => {
            let c = RunConfig::load(path)?;
            if c.command != cli.command {
                bail!(
                    "config {} is for `{}`, not `{}`",
                    path.display(),
                    c.command,
                    cli.command
                );
            }
            c
        }
        None => RunConfig::new(cli.command),
    };
    if let Some(o) = &cli.output {
        run.output_dir = o.clone();
    }
    if let Some(s) = cli.seed {
        run.seed = s;
    }
    if cli.quick {
        run.cfg = run.cfg.with_steps(128).unchecked();
    }
    if let Some(n) = cli.steps_per_period {
        run.cfg = run.cfg.with_steps(n);
    }
    run.validate().context("resolved configuration")?;
    Ok(run)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn execute(cli: &Cli) -> Result<bool> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            bail!("--jobs must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker pool")?;
    }
    let run = resolve(cli)?;
    let effort = Effort { quick: cli.quick };
    if run.command == Command::ReproducePaper {
        let outcome = reproduce::reproduce(&run, effort)?;
        println!("{}", outcome.summary);
        return Ok(outcome.all_passed);
    }
    println!("{}", commands::run(&run, effort)?);
    Ok(true)
}
