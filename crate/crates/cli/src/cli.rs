use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qconc::operator::Tolerances;

#[derive(Debug, Parser)]
#[command(
    name = "qconc",
    version,
    about = "Concentration bounds for measurement records of quantum Markov chains"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validation, invariant state, irreducibility, gaps and resolvent norms.
    Analyze(AnalyzeArgs),
    /// Evaluate bounds over a grid of horizons and deviations.
    Bound(BoundArgs),
    /// Monte Carlo tails with Wilson intervals.
    Simulate(SimulateArgs),
    /// Compare bounds against exact or Monte Carlo tails.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Structured,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FlavorArg {
    Bernstein,
    Hoeffding,
    Counting,
    Flux,
    TdmBernstein,
    TdmHoeffding,
    Multitime,
    Reducible,
    Ci,
}

impl FlavorArg {
    pub fn name(self) -> &'static str {
        match self {
            FlavorArg::Bernstein => "bernstein",
            FlavorArg::Hoeffding => "hoeffding",
            FlavorArg::Counting => "counting",
            FlavorArg::Flux => "flux",
            FlavorArg::TdmBernstein => "tdm-bernstein",
            FlavorArg::TdmHoeffding => "tdm-hoeffding",
            FlavorArg::Multitime => "multitime",
            FlavorArg::Reducible => "reducible",
            FlavorArg::Ci => "ci",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Model file (JSON).
    #[arg(long)]
    pub model: PathBuf,
    /// Initial state: a JSON file, `maximally-mixed` or `stationary`.
    /// Defaults to the model's `rho0`, else the stationary state.
    #[arg(long)]
    pub rho0: Option<String>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[command(flatten)]
    pub tol: TolArgs,
}

#[derive(Debug, Clone, Default, Args)]
pub struct TolArgs {
    #[arg(long, value_name = "X")]
    pub tol_psd: Option<f64>,
    #[arg(long, value_name = "X")]
    pub tol_trace: Option<f64>,
    #[arg(long, value_name = "X")]
    pub tol_channel: Option<f64>,
    #[arg(long, value_name = "X")]
    pub tol_eig: Option<f64>,
    #[arg(long, value_name = "X")]
    pub tol_peripheral: Option<f64>,
    #[arg(long, value_name = "X")]
    pub tol_decomposition: Option<f64>,
}

impl TolArgs {
    pub fn tolerances(&self) -> Tolerances {
        let mut t = Tolerances::default();
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut t.psd, self.tol_psd);
        set(&mut t.trace, self.tol_trace);
        set(&mut t.channel, self.tol_channel);
        set(&mut t.eig, self.tol_eig);
        set(&mut t.peripheral, self.tol_peripheral);
        set(&mut t.decomposition, self.tol_decomposition);
        t
    }
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    /// Comma-separated; defaults to the natural flavor of the model kind.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub flavor: Vec<FlavorArg>,
    /// Discrete horizons.
    #[arg(long, value_delimiter = ',')]
    pub n: Vec<u64>,
    /// Continuous horizons.
    #[arg(long, value_delimiter = ',')]
    pub t: Vec<f64>,
    /// Deviations from the stationary mean.
    #[arg(long, value_delimiter = ',', required = true)]
    pub gamma: Vec<f64>,
    /// Bound `P(|average − mean| ≥ γ)` instead of the upper tail.
    #[arg(long)]
    pub two_sided: bool,
    /// Counted jump label for counting models.
    #[arg(long)]
    pub jump: Option<String>,
    /// Replace the computed spectral gap (negative controls only).
    #[arg(long)]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Seed of the randomized resolvent-norm estimate.
    #[arg(long, default_value_t = qconc::bounds::RESOLVENT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub trials: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Write sampled trajectories here, one JSON record per line. Discrete
    /// records come from the model's base unravelling (`kraus`), or the
    /// embedded chain for classical models.
    #[arg(long)]
    pub dump: Option<PathBuf>,
    /// Number of trajectories written by `--dump`.
    #[arg(long, default_value_t = 100)]
    pub dump_limit: u64,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Monte Carlo trials when no exact tail is available; 0 disables Monte Carlo.
    #[arg(long, default_value_t = 0)]
    pub trials: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}
