use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "twincert", version, about = "Global robustness certification for ReLU networks")]
pub struct Cli {
    /// Worker threads for per-neuron solves and attacks.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Omit wall-clock times so identical runs produce identical bytes.
    #[arg(long, global = true)]
    pub stable: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Certified upper bound on the output variation.
    Certify(CertifyArgs),
    /// Exact bound from the two-copy MILP (small networks only).
    Exact(ExactArgs),
    /// Brute-force grid lower bound for inputs of dimension at most 3.
    Oracle(OracleArgs),
    /// Empirical lower bound from projected gradient attacks on a dataset.
    Pgd(PgdArgs),
    /// Invariant-set verdict and simulation for a closed-loop system.
    Acc(AccArgs),
    /// Write the two-neuron illustration network and its domain.
    MakeToy(MakeToyArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub network: PathBuf,
    /// L-infinity perturbation radius.
    #[arg(long)]
    pub delta: f64,
    /// Input domain file; `[-1, 1]` per input when omitted.
    #[arg(long)]
    pub domain: Option<PathBuf>,
    /// Output index to bound; repeat for several. All outputs when omitted.
    #[arg(long = "output")]
    pub outputs: Vec<usize>,
    /// Report file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SchemeArg {
    Itne,
    Btne,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum PreBoundsArg {
    Lp,
    Interval,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value_t = 2)]
    pub window: usize,
    /// Neurons kept exact per sub-problem.
    #[arg(long, default_value_t = 0)]
    pub refine: usize,
    #[arg(long, value_enum, default_value_t = SchemeArg::Itne)]
    pub scheme: SchemeArg,
    /// JSON array with the base input; certifies around this point only.
    #[arg(long)]
    pub local: Option<PathBuf>,
    /// Relax the target neuron's ReLU instead of encoding it exactly.
    #[arg(long)]
    pub no_target_refine: bool,
    #[arg(long, default_value_t = 1000)]
    pub node_limit: usize,
    #[arg(long, value_enum, default_value_t = PreBoundsArg::Lp)]
    pub pre_bounds: PreBoundsArg,
    /// Include the per-neuron range table in the report.
    #[arg(long)]
    pub ranges: bool,
}

#[derive(Debug, Args)]
pub struct ExactArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub local: Option<PathBuf>,
    /// Solve even when the unstable-neuron guard would refuse.
    #[arg(long)]
    pub force: bool,
    #[arg(long, default_value_t = 2_000_000)]
    pub node_limit: usize,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub grid_step: f64,
}

#[derive(Debug, Args)]
pub struct PgdArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// CSV of input samples, optional header row.
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub steps: usize,
    #[arg(long, default_value_t = 3)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Step length; `delta / 8` when omitted.
    #[arg(long)]
    pub step_size: Option<f64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum PolicyArg {
    Random,
    Extreme,
    Zero,
}

#[derive(Debug, Args)]
pub struct AccArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the perception error bound from the config.
    #[arg(long)]
    pub dd_bound: Option<f64>,
    #[arg(long, default_value_t = 500)]
    pub max_iters: usize,
    /// Number of closed-loop steps to simulate.
    #[arg(long)]
    pub simulate: Option<usize>,
    #[arg(long, value_enum, default_value_t = PolicyArg::Extreme)]
    pub policy: PolicyArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Initial state, comma separated. Defaults to the centre of the invariant set, or the
    /// upper corner of the safe box when there is none.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Option<Vec<f64>>,
    #[arg(long, default_value = "trajectory.csv")]
    pub trajectory: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MakeToyArgs {
    #[arg(long)]
    pub out: PathBuf,
}
