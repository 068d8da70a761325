//! The `mmacc` command.

use std::fmt;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mmacc_core::mmcc::{
    generalized_mmcc, generalized_mmcc_all_groups, mmcc, mmcc_independent_lower, AccountingParams, AdjacencyMode,
};
use mmacc_core::mog::{mog_from_binomial, MixtureGaussian};
use mmacc_core::{applications, matrices, tail_bounds, DiscretizationConfig, EncoderMatrix, Error};

use crate::experiments::{prefix_opt_sweep, tree_restart_sweep, tree_sweep, SweepConfig};
use crate::matrix_io::{self, MatrixIoError};
use crate::report::{self, AccountingReport, EpsilonReport};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_UNACHIEVABLE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "mmacc", version, about = "Amplified privacy accounting for matrix mechanisms")]
pub struct Cli {
    /// Worker threads (defaults to the number of logical cores).
    #[arg(long, global = true, env = "MMACC_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Account for one encoder matrix read from CSV.
    Mmcc(MmccArgs),
    /// Amplification sweeps; CSV on stdout.
    #[command(subcommand)]
    Experiment(Experiment),
    /// Write a standard encoder matrix as CSV.
    #[command(subcommand)]
    Matrix(MatrixCommand),
    /// Dump the conditional participation bounds as CSV.
    TailBounds(TailBoundsArgs),
    /// Binomial-sensitivity mechanisms.
    #[command(subcommand)]
    Apps(Apps),
    /// DP-SGD baseline: n-fold composition of the subsampled Gaussian.
    ComposeSgd(ComposeSgdArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Discretization {
    /// Privacy-loss grid.
    #[arg(long, default_value_t = 1e-4)]
    pub pld_grid: f64,
    /// Sensitivity grid.
    #[arg(long, default_value_t = 1e-3)]
    pub sens_grid: f64,
    /// Grid for inverting the privacy loss.
    #[arg(long, default_value_t = 1e-6)]
    pub inverse_grid: f64,
    /// Probability mass dropped (pessimistically) per tail.
    #[arg(long, default_value_t = 1e-12)]
    pub tail_mass: f64,
    #[arg(long, value_enum, default_value_t = AdjacencyArg::Both)]
    pub adjacency: AdjacencyArg,
}

impl Discretization {
    fn config(&self) -> DiscretizationConfig {
        DiscretizationConfig {
            pld_grid: self.pld_grid,
            sensitivity_grid: self.sens_grid,
            inverse_tolerance: self.inverse_grid,
            tail_truncation_mass: self.tail_mass,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AdjacencyArg {
    Remove,
    Add,
    Both,
}

impl From<AdjacencyArg> for AdjacencyMode {
    fn from(a: AdjacencyArg) -> Self {
        match a {
            AdjacencyArg::Remove => AdjacencyMode::Remove,
            AdjacencyArg::Add => AdjacencyMode::Add,
            AdjacencyArg::Both => AdjacencyMode::Both,
        }
    }
}

#[derive(Debug, Args)]
pub struct MmccArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long)]
    pub p: f64,
    #[arg(long)]
    pub sigma: f64,
    /// Total delta, split evenly unless --delta1/--delta2 are given.
    #[arg(long, default_value_t = 1e-6)]
    pub delta: f64,
    #[arg(long)]
    pub delta1: Option<f64>,
    #[arg(long)]
    pub delta2: Option<f64>,
    /// Minimum separation for b-min-sep sampling.
    #[arg(long, default_value_t = 1)]
    pub b: usize,
    /// Use the min-sep pipeline even when b = 1.
    #[arg(long)]
    pub generalized: bool,
    /// Take the worst of the b groups.
    #[arg(long)]
    pub all_groups: bool,
    /// Replace every participation bound by p (diagnostic, not a guarantee).
    #[arg(long)]
    pub independent_lower: bool,
    /// Build a PLD for every row instead of every distinct row.
    #[arg(long)]
    pub no_dedup: bool,
    #[command(flatten)]
    pub discretization: Discretization,
}

#[derive(Debug, Subcommand)]
pub enum Experiment {
    /// Binary tree, sigma = c sqrt(log2 n + 1), p = 1/n.
    Tree(SweepArgs),
    /// Prefix-sum square root, sigma = c ||C e_1||, p = 1/n.
    PrefixOpt(SweepArgs),
    /// Restarted trees: i.i.d. against min-sep sampling.
    TreeRestart(RestartArgs),
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [10.0, 20.0, 40.0])]
    pub c_list: Vec<f64>,
    /// Runs n = 2^1 .. 2^log_n_max.
    #[arg(long, default_value_t = 7)]
    pub log_n_max: u32,
    #[arg(long, default_value_t = 1e-6)]
    pub delta: f64,
    #[command(flatten)]
    pub discretization: Discretization,
}

#[derive(Debug, Args)]
pub struct RestartArgs {
    #[arg(long, default_value_t = 512)]
    pub n: usize,
    #[arg(long, default_value_t = 4)]
    pub height: u32,
    #[arg(long, default_value_t = 0.0625)]
    pub p: f64,
    #[arg(long, value_delimiter = ',', default_values_t = [10.0, 20.0, 40.0])]
    pub sigma_list: Vec<f64>,
    #[arg(long, default_value_t = 1e-6)]
    pub delta: f64,
    #[command(flatten)]
    pub discretization: Discretization,
}

#[derive(Debug, Subcommand)]
pub enum MatrixCommand {
    Gen(MatrixGenArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MatrixKind {
    BinaryTree,
    PrefixOpt,
    TreeRestart,
    Identity,
}

#[derive(Debug, Args)]
pub struct MatrixGenArgs {
    #[arg(long, value_enum)]
    pub kind: MatrixKind,
    #[arg(long)]
    pub n: usize,
    /// Tree height for tree-restart.
    #[arg(long, default_value_t = 4)]
    pub height: u32,
    /// Write to a file instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TailBoundsArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long)]
    pub p: f64,
    #[arg(long)]
    pub sigma: f64,
    #[arg(long, default_value_t = 5e-7)]
    pub delta1: f64,
    /// Evaluate at the first row of each block of b rows.
    #[arg(long, default_value_t = 1)]
    pub b: usize,
}

#[derive(Debug, Subcommand)]
pub enum Apps {
    /// Last iterate of gradient descent on linear losses.
    LastIterateLinear(LastIterateArgs),
    /// Group privacy of DP-SGD.
    GroupPrivacy(GroupArgs),
}

#[derive(Debug, Args)]
pub struct LastIterateArgs {
    #[arg(long)]
    pub n: u64,
    #[arg(long)]
    pub p: f64,
    #[arg(long)]
    pub sigma: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub delta: f64,
    #[command(flatten)]
    pub discretization: Discretization,
}

#[derive(Debug, Args)]
pub struct GroupArgs {
    /// Group size.
    #[arg(long)]
    pub k: u64,
    #[arg(long)]
    pub p: f64,
    #[arg(long)]
    pub sigma: f64,
    #[arg(long)]
    pub rounds: u64,
    #[arg(long, default_value_t = 1e-6)]
    pub delta: f64,
    /// Fixed-size batches: dataset size (batch = p * population).
    #[arg(long)]
    pub population: Option<u64>,
    #[command(flatten)]
    pub discretization: Discretization,
}

#[derive(Debug, Args)]
pub struct ComposeSgdArgs {
    #[arg(long)]
    pub n: u64,
    #[arg(long)]
    pub p: f64,
    #[arg(long)]
    pub sigma: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub delta: f64,
    #[command(flatten)]
    pub discretization: Discretization,
}

#[derive(Debug)]
pub enum CliError {
    Matrix(MatrixIoError),
    Accounting(Error),
    Io { path: Option<PathBuf>, source: io::Error },
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Accounting(Error::Unachievable { .. }) => EXIT_UNACHIEVABLE,
            _ => EXIT_USAGE,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Matrix(e) => write!(f, "{e}"),
            CliError::Accounting(e) => write!(f, "{e}"),
            CliError::Io { path: Some(p), source } => write!(f, "{}: {source}", p.display()),
            CliError::Io { path: None, source } => write!(f, "{source}"),
            CliError::Usage(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Accounting(e)
    }
}

impl From<MatrixIoError> for CliError {
    fn from(e: MatrixIoError) -> Self {
        CliError::Matrix(e)
    }
}

/// Parses the process arguments, runs the command and returns the exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("mmacc: cannot configure thread pool: {e}");
            return EXIT_USAGE;
        }
    }
    let mut out = io::stdout().lock();
    match run(cli.command, &mut out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("mmacc: {e}");
            e.exit_code()
        }
    }
}

fn elapsed_ms(start: Instant) -> u64 {
    start.elapsed().as_millis() as u64
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|source| CliError::Io { path: None, source })
}

fn json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain records serialize");
    s.push('\n');
    s
}

pub fn run(command: Command, out: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Mmcc(args) => cmd_mmcc(args, out),
        Command::Experiment(e) => cmd_experiment(e, out),
        Command::Matrix(MatrixCommand::Gen(args)) => cmd_matrix_gen(args, out),
        Command::TailBounds(args) => cmd_tail_bounds(args, out),
        Command::Apps(a) => cmd_apps(a, out),
        Command::ComposeSgd(args) => cmd_compose_sgd(args, out),
    }
}

fn load(path: &Path) -> Result<EncoderMatrix, CliError> {
    Ok(matrix_io::load_csv(path)?)
}

fn split_delta(delta: f64, delta1: Option<f64>, delta2: Option<f64>) -> (f64, f64) {
    match (delta1, delta2) {
        (Some(a), Some(b)) => (a, b),
        (Some(a), None) => (a, delta - a),
        (None, Some(b)) => (delta - b, b),
        (None, None) => (delta / 2.0, delta / 2.0),
    }
}

fn cmd_mmcc(args: MmccArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let c = load(&args.matrix)?;
    let (delta1, delta2) = split_delta(args.delta, args.delta1, args.delta2);
    let mut params = AccountingParams::new(args.p, args.sigma, delta1, delta2);
    params.b = args.b;
    params.adjacency = args.discretization.adjacency.into();
    params.discretization = args.discretization.config();
    params.dedup = !args.no_dedup;
    let start = Instant::now();
    let mut result = if args.independent_lower {
        mmcc_independent_lower(&c, &params)?
    } else if args.all_groups {
        generalized_mmcc_all_groups(&c, &params)?
    } else if args.b > 1 || args.generalized {
        generalized_mmcc(&c, &params)?
    } else {
        mmcc(&c, &params)?
    };
    result.runtime_ms = elapsed_ms(start);
    emit(out, &json(&AccountingReport::from(&result)))
}

fn sweep_config(delta: f64, d: &Discretization) -> SweepConfig {
    SweepConfig {
        delta,
        adjacency: d.adjacency.into(),
        discretization: d.config(),
    }
}

fn check_sweep(args: &SweepArgs) -> Result<(), CliError> {
    if args.c_list.is_empty() {
        return Err(CliError::Usage("--c-list must not be empty".into()));
    }
    if !(1..=30).contains(&args.log_n_max) {
        return Err(CliError::Usage("--log-n-max must be in 1..=30".into()));
    }
    Ok(())
}

fn cmd_experiment(e: Experiment, out: &mut dyn Write) -> Result<(), CliError> {
    let text = match e {
        Experiment::Tree(args) => {
            check_sweep(&args)?;
            let cfg = sweep_config(args.delta, &args.discretization);
            report::to_csv(&tree_sweep(&args.c_list, args.log_n_max, &cfg)?, &report::AMPLIFICATION_HEADER)
        }
        Experiment::PrefixOpt(args) => {
            check_sweep(&args)?;
            let cfg = sweep_config(args.delta, &args.discretization);
            report::to_csv(
                &prefix_opt_sweep(&args.c_list, args.log_n_max, &cfg)?,
                &report::AMPLIFICATION_HEADER,
            )
        }
        Experiment::TreeRestart(args) => {
            if args.sigma_list.is_empty() {
                return Err(CliError::Usage("--sigma-list must not be empty".into()));
            }
            let cfg = sweep_config(args.delta, &args.discretization);
            let rows = tree_restart_sweep(args.n, args.height, args.p, &args.sigma_list, &cfg)?;
            report::to_csv(&rows, &report::RESTART_HEADER)
        }
    };
    emit(out, &text)
}

fn cmd_matrix_gen(args: MatrixGenArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let m = match args.kind {
        MatrixKind::BinaryTree => matrices::binary_tree(args.n)?,
        MatrixKind::PrefixOpt => matrices::prefix_opt(args.n)?,
        MatrixKind::TreeRestart => matrices::tree_restart(args.n, args.height)?,
        MatrixKind::Identity => matrices::identity(args.n)?,
    };
    match args.output {
        Some(path) => Ok(matrix_io::save_csv(&m, &path)?),
        None => emit(out, &matrix_io::format_csv(&m)),
    }
}

fn cmd_tail_bounds(args: TailBoundsArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let c = load(&args.matrix)?;
    let table = tail_bounds::block_tail_bounds(&c, args.p, args.sigma, args.delta1, args.b)?;
    emit(out, &matrix_io::format_grid(table.rows(), table.cols(), table.values()))
}

fn epsilon_report(start: Instant, epsilon: f64, delta: f64, out: &mut dyn Write) -> Result<(), CliError> {
    let r = EpsilonReport {
        epsilon,
        delta,
        runtime_ms: elapsed_ms(start),
    };
    emit(out, &json(&r))
}

fn mixture_epsilon(mog: &MixtureGaussian, rounds: u64, delta: f64, d: &Discretization) -> Result<f64, CliError> {
    Ok(applications::mixture_epsilon(mog, rounds, delta, &d.config(), d.adjacency.into())?)
}

fn positive_rounds(n: u64) -> Result<(), CliError> {
    if n == 0 {
        return Err(CliError::Usage("round count must be at least 1".into()));
    }
    Ok(())
}

fn cmd_apps(a: Apps, out: &mut dyn Write) -> Result<(), CliError> {
    let start = Instant::now();
    match a {
        Apps::LastIterateLinear(args) => {
            positive_rounds(args.n)?;
            let mog = mog_from_binomial(args.n, args.p, 1.0, args.sigma * (args.n as f64).sqrt())?;
            let eps = mixture_epsilon(&mog, 1, args.delta, &args.discretization)?;
            epsilon_report(start, eps, args.delta, out)
        }
        Apps::GroupPrivacy(args) => {
            positive_rounds(args.rounds)?;
            let eps = match args.population {
                Some(pop) => {
                    let batch = (args.p * pop as f64).round() as u64;
                    let cfg = args.discretization.config();
                    applications::group_privacy_fixed_batch_epsilon(
                        args.k, pop, batch, args.sigma, args.rounds, args.delta, &cfg,
                    )?
                }
                None => {
                    let mog = mog_from_binomial(args.k, args.p, 1.0, args.sigma)?;
                    mixture_epsilon(&mog, args.rounds, args.delta, &args.discretization)?
                }
            };
            epsilon_report(start, eps, args.delta, out)
        }
    }
}

fn cmd_compose_sgd(args: ComposeSgdArgs, out: &mut dyn Write) -> Result<(), CliError> {
    positive_rounds(args.n)?;
    let start = Instant::now();
    let mog = MixtureGaussian::subsampled_gaussian(args.p, 1.0, args.sigma)?;
    let eps = mixture_epsilon(&mog, args.n, args.delta, &args.discretization)?;
    epsilon_report(start, eps, args.delta, out)
}
