//! `irqi`: run inexact Rayleigh quotient iteration experiments on Matrix
//! Market files.
//!
//! Exit status: 0 success, 2 invalid configuration or input, 3 I/O
//! failure, 4 solver failure, 5 no convergence within `--max-outer`.

mod config;
mod error;
mod experiment;
mod output;
mod sweep;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use irqi::generators::{bcspwr08_like, beta_diagonal, beta_problem, laplacian_2d, random_hermitian};
use irqi::matio::to_matrix_market;

use config::{read_run_file, read_sweep_file, ExperimentConfig, OutputFormat, Partial, SweepFile};
use error::{CliError, CliResult};
use experiment::{execute, Problem};

#[derive(Parser)]
#[command(name = "irqi", version, about = "Inexact Rayleigh quotient iteration experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one policy and write its table, trace and verification report.
    Run(RunArgs),
    /// Run several policies on one matrix in parallel.
    Sweep(SweepArgs),
    /// Write a synthetic test matrix in Matrix Market format.
    Generate(GenerateArgs),
}

/// Flags shared by `run` and `sweep`; each overrides the config file.
#[derive(Args)]
struct Common {
    /// TOML file with the same keys as the flags (kebab-case).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Matrix Market file.
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// smallest, largest, closest:<shift> or index:<k>.
    #[arg(long)]
    target: Option<String>,
    /// none or tuned:<diagonal|ic|dense>.
    #[arg(long)]
    precond: Option<String>,
    /// Stop when ‖r_k‖ ≤ tol ‖A‖₁.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_outer: Option<usize>,
    /// Lanczos steps per inner solve (default: matrix order).
    #[arg(long)]
    max_inner: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Initial angle to the target eigenvector (needs the oracle).
    #[arg(long = "sin-phi0")]
    sin_phi0: Option<f64>,
    /// on or off; the dense oracle is limited to order 2000.
    #[arg(long)]
    oracle: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
}

impl Common {
    fn partial(&self) -> Partial {
        Partial {
            matrix: self.matrix.clone(),
            target: self.target.clone(),
            policy: None,
            precond: self.precond.clone(),
            tol: self.tol,
            max_outer: self.max_outer,
            max_inner: self.max_inner,
            seed: self.seed,
            sin_phi0: self.sin_phi0,
            oracle: self.oracle.clone(),
            out: self.out.clone(),
            format: self.format,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// exact, fixed:<xi>, decreasing, quad:<c1> or linear:<c2>.
    #[arg(long)]
    policy: Option<String>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated policies; replaces the entries of the config file.
    #[arg(long, value_delimiter = ',')]
    policies: Option<Vec<String>>,
    /// Entries run concurrently (default: available cores).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    /// Prescribed spread over gap, mixed by plane rotations.
    Beta,
    /// Prescribed spread over gap, diagonal.
    BetaDiagonal,
    /// Order-1624 stand-in for the power-network test matrix.
    Bcspwr08Like,
    /// Five-point Laplacian on an n x n grid.
    Laplacian,
    /// Dense random real symmetric.
    Random,
    /// Dense random complex Hermitian.
    RandomComplex,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Spread over gap, for the beta kinds.
    #[arg(long, default_value_t = 10.0)]
    beta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn run_cmd(args: RunArgs) -> CliResult<()> {
    let file = match &args.common.config {
        Some(p) => read_run_file(p)?,
        None => Partial::default(),
    };
    let flags = Partial { policy: args.policy, ..args.common.partial() };
    let cfg = ExperimentConfig::resolve(&file.overlay(&flags))?;
    let problem = Problem::load(&cfg)?;
    let outcome = execute(&cfg, &problem)?;
    outcome.write(&cfg.out_dir)?;
    if cfg.format.table() {
        print!("{}", outcome.table());
    }
    eprintln!(
        "{}: {:?} after {} outer / {} inner steps, theta = {:.15e}, output in {}",
        outcome.label(),
        outcome.status,
        outcome.trace.outer_steps(),
        outcome.trace.total_inner_steps(),
        outcome.theta,
        cfg.out_dir.display()
    );
    outcome.check()
}

fn sweep_cmd(args: SweepArgs) -> CliResult<()> {
    let file = match &args.common.config {
        Some(p) => read_sweep_file(p)?,
        None => SweepFile::default(),
    };
    let plan = sweep::plan(file, &args.common.partial(), args.policies, args.workers)?;
    sweep::execute_plan(&plan)
}

fn generate_cmd(args: GenerateArgs) -> CliResult<()> {
    let core = |e| CliError::from_core("generator", e);
    let a = match args.kind {
        Kind::Beta => beta_problem(args.n, args.beta, args.seed).map_err(core)?.matrix,
        Kind::BetaDiagonal => beta_diagonal(args.n, args.beta).map_err(core)?,
        Kind::Bcspwr08Like => bcspwr08_like().matrix,
        Kind::Laplacian => laplacian_2d(args.n).map_err(core)?,
        Kind::Random => random_hermitian(args.n, false, args.seed),
        Kind::RandomComplex => random_hermitian(args.n, true, args.seed),
    };
    output::write_atomic(&args.out, to_matrix_market(&a).as_bytes())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run_cmd(a),
        Command::Sweep(a) => sweep_cmd(a),
        Command::Generate(a) => generate_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("irqi: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
