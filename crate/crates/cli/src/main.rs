//! `fracwave`: run, sweep, diagnose and resume fractional Camassa-Holm,
//! KdV and BBM simulations from JSON configurations.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 wave breaking,
//! 3 blow-up.

mod config;
mod diagnose;
mod output;
mod run;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{load, RunConfig};
use run::{execute, Start, EXIT_CONFIG};

#[derive(Parser)]
#[command(name = "fracwave", version, about = "Pseudo-spectral fCH / fKdV / fBBM solver")]
struct Cli {
    /// Permit model orders 1/2 <= nu < 1.
    #[arg(long, global = true)]
    allow_low_nu: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Override a config value, e.g. `--set solver.t_end=2`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation.
    Run(Common),
    /// Run one simulation per value of nu or of the initial amplitude.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        axis: sweep::Axis,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<f64>,
        /// Maximum concurrent runs.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Sample an estimate or run a study and write a JSON report.
    Diagnose {
        #[arg(value_enum)]
        kind: diagnose::Subkind,
        /// Parameters; defaults are used for anything not given.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Report path (default `<kind>_report.json`).
        #[arg(long)]
        output: Option<PathBuf>,
        /// Accepted for uniformity; samples within one report already run in parallel.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Continue a run from a checkpoint.
    Resume {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

fn load_run(common: &Common) -> Result<RunConfig, i32> {
    load(&common.config, &common.overrides).map_err(|e| {
        eprintln!("error: {e}");
        EXIT_CONFIG
    })
}

fn report(summary: &run::RunSummary) -> i32 {
    match &summary.message {
        Some(m) if summary.exit_code == EXIT_CONFIG => eprintln!("error: {m}"),
        Some(m) => eprintln!("{}: {m}", summary.outcome),
        None => println!("{}", summary.outcome),
    }
    summary.exit_code
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG as u8 } else { 0 });
        }
    };
    let code = match cli.command {
        Command::Run(common) => match load_run(&common) {
            Ok(cfg) => report(&execute(&cfg, cli.allow_low_nu, Start::Fresh)),
            Err(code) => code,
        },
        Command::Resume { checkpoint, common } => match load_run(&common) {
            Ok(cfg) => report(&execute(&cfg, cli.allow_low_nu, Start::Resume(&checkpoint))),
            Err(code) => code,
        },
        Command::Sweep {
            common,
            axis,
            values,
            jobs,
        } => match load_run(&common) {
            Ok(cfg) => sweep::sweep(&cfg, axis, &values, jobs, cli.allow_low_nu),
            Err(code) => code,
        },
        Command::Diagnose {
            kind,
            config,
            overrides,
            output,
            jobs,
        } => {
            let output = output.unwrap_or_else(|| {
                let name = format!("{kind:?}").to_lowercase();
                PathBuf::from(format!("{name}_report.json"))
            });
            let run = || {
                diagnose::diagnose(kind, config.as_deref(), &overrides, &output, cli.allow_low_nu)
            };
            if jobs > 0 {
                match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
                    Ok(pool) => pool.install(run),
                    Err(e) => {
                        eprintln!("error: cannot start worker pool: {e}");
                        EXIT_CONFIG
                    }
                }
            } else {
                run()
            }
        }
    };
    ExitCode::from(code as u8)
}
