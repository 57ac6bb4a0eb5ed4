use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "memn",
    version,
    about = "Memory-n donation games: transition matrices, payoffs, adaptive dynamics and a verification battery"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the sparse transition matrix of two strategies.
    Matrix(MatrixArgs),
    /// Print the payoff A and its parts A_s, A_a as JSON.
    Payoff(PayoffArgs),
    /// Print the adaptive-dynamics field at a point as JSON.
    Field(FieldArgs),
    /// Integrate the adaptive dynamics and write the trajectory as CSV.
    Integrate(IntegrateArgs),
    /// Run the verification battery and write a JSON report.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Args)]
pub struct GameArgs {
    /// Donation game benefit.
    #[arg(long, default_value_t = 2.0)]
    pub b: f64,
    /// Donation game cost.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// A general game `R,S,T,P` instead of the donation game.
    #[arg(long, value_delimiter = ',', num_args = 4, conflicts_with_all = ["b", "c"])]
    pub rstp: Option<Vec<f64>>,
    /// Use the per-round payoffs summed over the window instead of averaged.
    #[arg(long)]
    pub unnormalized: bool,
}

#[derive(Debug, Args)]
pub struct MatrixArgs {
    #[arg(long)]
    pub n: usize,
    /// Focal player's strategy file.
    #[arg(long)]
    pub p: PathBuf,
    /// Co-player's strategy file.
    #[arg(long)]
    pub q: PathBuf,
    /// Read two-entry reactive strategies `(p1, p2)`.
    #[arg(long)]
    pub reactive: bool,
    /// Output path, stdout if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PayoffMethodArg {
    Determinant,
    Stationary,
}

#[derive(Debug, Args)]
pub struct PayoffArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: PathBuf,
    #[arg(long)]
    pub q: PathBuf,
    #[arg(long)]
    pub reactive: bool,
    #[command(flatten)]
    pub game: GameArgs,
    #[arg(long, value_enum, default_value_t = PayoffMethodArg::Determinant)]
    pub method: PayoffMethodArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Full,
    Sym,
    Antisym,
    Reparam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GradientArg {
    Analytic,
    Central,
}

#[derive(Debug, Args)]
pub struct FieldArgs {
    /// Strategy file holding the evaluation point.
    #[arg(long)]
    pub at: PathBuf,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_enum, default_value_t = VariantArg::Full)]
    pub variant: VariantArg,
    #[command(flatten)]
    pub game: GameArgs,
    #[arg(long, value_enum, default_value_t = GradientArg::Analytic)]
    pub gradient: GradientArg,
    /// Central-difference step.
    #[arg(long, default_value_t = 1e-5)]
    pub h: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Rk4,
    Rk45,
}

#[derive(Debug, Args)]
pub struct IntegrateArgs {
    #[arg(long, value_enum, default_value_t = VariantArg::Antisym)]
    pub variant: VariantArg,
    #[arg(long)]
    pub n: usize,
    #[command(flatten)]
    pub game: GameArgs,
    /// Initial state file.
    #[arg(long)]
    pub x0: PathBuf,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long, default_value_t = 5.0)]
    pub tmax: f64,
    #[arg(long, value_enum, default_value_t = MethodArg::Rk4)]
    pub method: MethodArg,
    #[arg(long, default_value_t = 1e-10)]
    pub rtol: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub atol: f64,
    /// Stop once a coordinate comes this close to 0 or 1.
    #[arg(long, default_value_t = 1e-3)]
    pub margin: f64,
    /// Write every k-th state (the last state is always written).
    #[arg(long, default_value_t = 1)]
    pub every: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_conflicts_with_subcommands = true)]
pub struct VerifyArgs {
    #[command(subcommand)]
    pub target: Option<VerifyTarget>,
    #[command(flatten)]
    pub battery: BatteryArgs,
}

#[derive(Debug, Args)]
pub struct BatteryArgs {
    /// Largest memory length; above 2 requires --deep.
    #[arg(long)]
    pub n_max: Option<usize>,
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Report path, stdout if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Extend the battery to memory 4 (or --n-max).
    #[arg(long)]
    pub deep: bool,
    /// Do not print the per-check summary on stderr.
    #[arg(long)]
    pub quiet: bool,
    /// Negative control: perturb one transition entry.
    #[arg(long, hide = true)]
    pub inject_fault: bool,
}

#[derive(Debug, Subcommand)]
pub enum VerifyTarget {
    /// Only the relabelling identities, at one memory length.
    Symmetry(SymmetryArgs),
}

#[derive(Debug, Args)]
pub struct SymmetryArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub quiet: bool,
}
