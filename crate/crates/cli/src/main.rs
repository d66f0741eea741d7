//! `lattice-sim`: simulation, kernel tabulation and invariant checks for
//! power-law-noise and mutually catalytic lattice systems.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lattice_extinction::verify::{VerifyOptions, DEFAULT_KERNEL_TOL};

use commands::{KernelArgs, Loaded, Outcome};
use error::{CliError, EXIT_ASSERTION, EXIT_OK};

#[derive(Parser)]
#[command(name = "lattice-sim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run replicas and write trajectory summaries and the extinction curve.
    Simulate(RunArgs),
    /// Estimate the extinction curve with confidence intervals.
    Curve(RunArgs),
    /// Check the mass martingale and catalytic moment identities.
    Moments(RunArgs),
    /// Tabulate the random-walk kernel with its two-sided bounds.
    Kernel {
        #[arg(long)]
        d: usize,
        /// Comma-separated times.
        #[arg(long, value_delimiter = ',', required = true)]
        t: Vec<f64>,
        /// Coordinate range `a:b`, applied to every axis.
        #[arg(long, allow_hyphen_values = true, value_parser = parse_range)]
        x: (i32, i32),
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        /// Jump rate of each coordinate (2 for the discrete Laplacian).
        #[arg(long, default_value_t = 2.0)]
        axis_rate: f64,
        /// Output file; the table goes to stdout otherwise.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an invariant suite: kernel, engine, estimators or all.
    Verify {
        suite: String,
        #[arg(long)]
        seed: Option<u64>,
        /// JSON summary file.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, hide = true, default_value_t = DEFAULT_KERNEL_TOL)]
        kernel_tol: f64,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    config: PathBuf,
    /// Overrides `run.master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_range(s: &str) -> Result<(i32, i32), String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected a:b, got `{s}`"))?;
    let a = a.trim().parse().map_err(|e| format!("bad start `{a}`: {e}"))?;
    let b = b.trim().parse().map_err(|e| format!("bad end `{b}`: {e}"))?;
    Ok((a, b))
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    match cli.command {
        Command::Simulate(a) => {
            let threads = commands::threads_from_env()?;
            commands::simulate_cmd(&Loaded::read(&a.config, a.seed, a.out.as_deref())?, threads)
        }
        Command::Curve(a) => {
            let threads = commands::threads_from_env()?;
            commands::curve_cmd(&Loaded::read(&a.config, a.seed, a.out.as_deref())?, threads)
        }
        Command::Moments(a) => {
            let threads = commands::threads_from_env()?;
            commands::moments_cmd(&Loaded::read(&a.config, a.seed, a.out.as_deref())?, threads)
        }
        Command::Kernel {
            d,
            t,
            x,
            tol,
            axis_rate,
            out,
        } => commands::kernel_cmd(
            &KernelArgs {
                d,
                t,
                x,
                tol,
                axis_rate,
            },
            out.as_deref(),
        ),
        Command::Verify {
            suite,
            seed,
            out,
            kernel_tol,
        } => {
            let mut opts = VerifyOptions {
                kernel_tol,
                ..VerifyOptions::default()
            };
            if let Some(s) = seed {
                opts.seed = s;
            }
            commands::verify_cmd(&suite, &opts, out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(outcome) => {
            for l in &outcome.lines {
                println!("{l}");
            }
            ExitCode::from(if outcome.failed { EXIT_ASSERTION } else { EXIT_OK })
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
