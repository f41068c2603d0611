//! `uwdae`: solve, certify and reduce parameterized linear DAEs.
//!
//! Exit codes: 0 success, 2 invalid input (arguments, files, manifests),
//! 3 numerical failure (singular assembly, irregular pencil, ...).

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "uwdae",
    version,
    about = "Ultraweak space-time solver and certified reduced basis for linear DAEs"
)]
struct Cli {
    /// Worker threads for parallel sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Detailed solve with residual and error estimator.
    Solve(SolveArgs),
    /// Relative error and estimator over a list of grid sizes.
    Convergence(ConvergenceArgs),
    /// Weak greedy training; writes the reduced model and its history.
    Greedy(GreedyArgs),
    /// Error of coarse control grids against the fully resolved control.
    Reduce(ReduceArgs),
    /// Online solve with a saved reduced model.
    Rbsolve(RbsolveArgs),
    /// Writes a benchmark system as a manifest directory.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
struct SystemArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Parameter: comma-separated values or a file of numbers.
    #[arg(long)]
    mu: Option<String>,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    system: SystemArgs,
    /// Time intervals; defaults to the manifest grid.
    #[arg(long = "K")]
    k: Option<usize>,
    /// Refinement of the test space used by the estimator.
    #[arg(long, default_value_t = 2)]
    refine: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ConvergenceArgs {
    #[command(flatten)]
    system: SystemArgs,
    #[arg(long = "K", value_delimiter = ',', default_values_t = [32, 64, 128, 256])]
    k: Vec<usize>,
    /// Refinement of the test space used by the estimator.
    #[arg(long, default_value_t = 2)]
    refine: usize,
    /// The reference is the detailed solution on this many times the finest grid.
    #[arg(long, default_value_t = 4)]
    reference_factor: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct GreedyArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long = "K")]
    k: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    /// Basis size limit; defaults to the number of right-hand side terms.
    #[arg(long)]
    nmax: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Training set size.
    #[arg(long, default_value_t = 200)]
    train: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ReduceArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// State grid intervals; the reference control lives on this grid.
    #[arg(long = "K")]
    k: Option<usize>,
    #[arg(long = "Ku", value_delimiter = ',', required = true)]
    ku: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of random smooth controls.
    #[arg(long, default_value_t = 20)]
    samples: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct RbsolveArgs {
    /// Directory written by `greedy`.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    mu: String,
    /// Manifest of the training system; enables the lifted trajectory.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BenchKind {
    Rlc,
    Stokes,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Source {
    Smooth,
    Square,
}

#[derive(Args, Debug)]
struct BenchArgs {
    kind: BenchKind,
    /// Grid intervals recorded in the manifest.
    #[arg(long = "K")]
    k: Option<usize>,
    /// Control intervals (stokes).
    #[arg(long = "Ku")]
    ku: Option<usize>,
    /// Cells per side (stokes).
    #[arg(long, default_value_t = 8)]
    cells: usize,
    /// Voltage source (rlc).
    #[arg(long, value_enum, default_value_t = Source::Smooth)]
    source: Source,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("UWDAE_LOG", "warn")).init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Solve(a) => commands::solve(a),
        Command::Convergence(a) => commands::convergence(a),
        Command::Greedy(a) => commands::greedy(a),
        Command::Reduce(a) => commands::reduce(a),
        Command::Rbsolve(a) => commands::rbsolve(a),
        Command::Bench(a) => commands::bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {}", e.stage, e.source);
            ExitCode::from(if e.source.is_numerical() { 3 } else { 2 })
        }
    }
}
