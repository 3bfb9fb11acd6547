//! `acoe-lab`: discounted and average-cost solves, verification, simulation
//! and parameter sweeps for periodic-review inventory instances.

mod commands;
mod manifest;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use acoe_lab::Error;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "acoe-lab", version, about = "Inventory MDP laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Value iteration at one discount factor; writes v, u, G tables and (s,S).
    SolveDiscounted(DiscountedArgs),
    /// Vanishing-discount solve; writes the average-cost report, ũ and H.
    SolveAverage(AverageArgs),
    /// Re-checks the artifacts of a previous solve in --out.
    Verify(VerifyArgs),
    /// Monte Carlo cost estimate for a policy file.
    Simulate(SimulateArgs),
    /// Average-cost solves over a grid of K or c̄ values.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct DiscountedArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    alpha: f64,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = acoe_lab::average::MAX_SWEEPS)]
    max_sweeps: usize,
}

#[derive(Args)]
struct AverageArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Comma-separated increasing discount factors.
    #[arg(long, value_delimiter = ',')]
    schedule: Option<Vec<f64>>,
    /// Accuracy of each (1-α)·v_α.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Directory holding the solve artifacts; the verification report is written here too.
    #[arg(long)]
    out: PathBuf,
    /// Seed for the Monte Carlo terms of the upper bound.
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    policy: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    replications: usize,
    #[arg(long, default_value_t = 20_000)]
    horizon: usize,
    #[arg(long, default_value_t = 2_000)]
    burn_in: usize,
    #[arg(long, default_value_t = 0.0)]
    initial_state: f64,
    /// Also estimate the discounted cost at this factor.
    #[arg(long)]
    alpha: Option<f64>,
    /// Write the first replication's path as CSV.
    #[arg(long)]
    trajectory: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_parser = ["K", "c_bar"])]
    param: String,
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    schedule: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long)]
    out: PathBuf,
}

/// Why a command stopped.
pub enum Failure {
    /// Some verification check failed.
    Verification(String),
    Lab(Error),
    Other(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lab(e)
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast::<Error>() {
            Ok(lab) => Failure::Lab(lab),
            Err(e) => Failure::Other(e),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Lab(Error::Io(e))
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Other(e.into())
    }
}

fn exit_code(f: &Failure) -> u8 {
    match f {
        Failure::Verification(_) => 1,
        Failure::Lab(Error::NonConvergence { .. }) => 3,
        Failure::Lab(_) | Failure::Other(_) => 2,
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("ACOE_LAB_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
    {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    let result = match cli.command {
        Command::SolveDiscounted(a) => commands::solve_discounted(&a),
        Command::SolveAverage(a) => commands::solve_average(&a),
        Command::Verify(a) => verify::run(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Sweep(a) => commands::sweep(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Verification(msg) => eprintln!("verification failed: {msg}"),
                Failure::Lab(e) => eprintln!("error: {e}"),
                Failure::Other(e) => eprintln!("error: {e:#}"),
            }
            ExitCode::from(exit_code(&f))
        }
    }
}
