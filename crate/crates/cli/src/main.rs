mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};

use config::CommonArgs;

#[derive(Parser, Debug)]
#[command(name = "spm", version, about = "Stochastic particle solver with birth-death dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One solver run: run.csv, reconstruction.csv or projection.csv, meta.txt.
    Run(CommonArgs),
    /// Sweep exactly one of --n0, --tau, --h across seeds: convergence.csv, orders.csv.
    Convergence(CommonArgs),
    /// Error against wall time for both methods: efficiency.csv.
    Compare(CompareArgs),
    /// Deterministic Strang reference for benchmark1d: reference.csv.
    Reference(ReferenceArgs),
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// N(0) values for the baseline SPM.
    #[arg(long, value_delimiter = ',')]
    pub spm_n0: Vec<f64>,
    /// N(0) values for birth-death.
    #[arg(long, value_delimiter = ',')]
    pub bd_n0: Vec<f64>,
}

#[derive(Args, Debug)]
pub struct ReferenceArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Half width L of the periodic domain [-L, L).
    #[arg(long)]
    pub half_width: Option<f64>,
    /// Number of Fourier modes (power of two).
    #[arg(long)]
    pub modes: Option<usize>,
    /// Reference time step.
    #[arg(long)]
    pub tau_ref: Option<f64>,
    /// Also estimate the self-convergence order (runs at τ, τ/2, τ/4).
    #[arg(long)]
    pub self_convergence: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let invocation = output::invocation();
    let result = match cli.command {
        Command::Run(args) => resolve_problem(&args).and_then(|r| commands::run(r, &invocation)),
        Command::Convergence(args) => resolve_problem(&args).and_then(|r| commands::convergence(r, &invocation)),
        Command::Compare(args) => resolve_problem(&args.common).and_then(|r| commands::compare(r, &args, &invocation)),
        Command::Reference(args) => args.common.resolve().and_then(|r| commands::reference(r, &args, &invocation)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

/// Resolve flags and insist on a problem name; a missing one is a usage error.
fn resolve_problem(args: &CommonArgs) -> anyhow::Result<config::Resolved> {
    let resolved = args.resolve()?;
    if resolved.problem.is_none() {
        Cli::command()
            .error(
                clap::error::ErrorKind::MissingRequiredArgument,
                "the following required argument was not provided: --problem <PROBLEM>",
            )
            .exit();
    }
    Ok(resolved)
}
