//! `knockagg`: run nodes, the coordinator, baselines and simulation studies
//! from the command line. Nodes and coordinator talk through files holding
//! the wire encoding, so a pipeline is a sequence of ordinary commands.

mod commands;
mod configs;
mod io;
mod specs;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Exit code 1: bad input or configuration. Exit code 2: the computation failed.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Runtime(format!("{}: {e}", path.display()))
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<knockagg::Error> for CliError {
    fn from(e: knockagg::Error) -> Self {
        use knockagg::Error as E;
        match e {
            E::SingularDesign { .. } | E::NotPsd(_) | E::Convergence { .. } => CliError::Runtime(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "knockagg", version, about = "FDR-controlled variable selection across decentralized linear models")]
struct Cli {
    /// Print progress and output paths to stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute one node's knockoff statistics and write its encoded summary.
    Node(NodeArgs),
    /// Combine node summaries and run the weighted knockoff selection.
    Aggregate(AggregateArgs),
    /// Run a baseline (OLS + BHq, or cross-validated Lasso with majority vote).
    Baseline(BaselineArgs),
    /// Run a simulation study from a JSON config or a bundled one.
    Experiment(ExperimentArgs),
    /// Construct knockoffs for a design and report the Gram identity residuals.
    ValidateKnockoffs(ValidateArgs),
}

#[derive(Args)]
pub struct GridArgs {
    /// Number of λ values on the Lasso path grid.
    #[arg(long, default_value_t = knockagg::node::LambdaGrid::default().points)]
    pub lambda_points: usize,
    /// Smallest λ as a fraction of λ_max.
    #[arg(long, default_value_t = knockagg::node::LambdaGrid::default().min_ratio)]
    pub lambda_min_ratio: f64,
}

#[derive(Args)]
pub struct NodeArgs {
    /// n x p design matrix (CSV or whitespace separated).
    #[arg(long)]
    pub design: PathBuf,
    /// Response vector of length n.
    #[arg(long)]
    pub response: PathBuf,
    /// Wire mode: binary-median, fixed16 or raw32.
    #[arg(long, default_value = "raw32")]
    pub mode: String,
    /// Seed for tie-breaking coin flips.
    #[arg(long, env = "KNOCKAGG_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Seed for the knockoff construction; derived from --seed and --node-id when absent.
    #[arg(long)]
    pub knockoff_seed: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub node_id: u32,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct AggregateArgs {
    /// Encoded node summaries.
    #[arg(required = true)]
    pub summaries: Vec<PathBuf>,
    /// Nominal wFDR level.
    #[arg(long, default_value_t = 0.2)]
    pub q: f64,
    /// max | sum_top_r:R | product_top_r:R | weighted_sum[:w1,...] | JSON.
    #[arg(long, default_value = "weighted_sum")]
    pub gamma: String,
    /// step:C | linear | poly:D | table:x=y,... | JSON.
    #[arg(long, default_value = "step:0.5")]
    pub omega: String,
    /// Selection CSV; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum BaselineMethod {
    Ols,
    Vote,
}

#[derive(Args)]
pub struct BaselineArgs {
    #[arg(long, value_enum)]
    pub method: BaselineMethod,
    /// One design per node, in node order.
    #[arg(long, required = true)]
    pub design: Vec<PathBuf>,
    /// One response per node, in the same order.
    #[arg(long, required = true)]
    pub response: Vec<PathBuf>,
    #[arg(long, default_value_t = 0.2)]
    pub q: f64,
    /// Cross-validation folds for the vote.
    #[arg(long, default_value_t = knockagg::baselines::DEFAULT_CV_FOLDS)]
    pub folds: usize,
    /// Seed for the fold assignment.
    #[arg(long, env = "KNOCKAGG_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ExperimentArgs {
    /// JSON config file.
    #[arg(required_unless_present_any = ["bundled", "list"], conflicts_with = "bundled")]
    pub config: Option<PathBuf>,
    /// Name of a bundled config (see --list).
    #[arg(long)]
    pub bundled: Option<String>,
    /// List bundled configs and exit.
    #[arg(long)]
    pub list: bool,
    /// Allow the full-size bundled configs, which take hours.
    #[arg(long)]
    pub full_scale: bool,
    /// Directory for the metrics CSV and plot data.
    #[arg(long, default_value = "knockagg-out")]
    pub out_dir: PathBuf,
    /// Override the config's seed.
    #[arg(long, env = "KNOCKAGG_SEED")]
    pub seed: Option<u64>,
    /// Override the number of replicates.
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Also write every node's inputs, seeds and the per-replicate selections,
    /// so the run can be replayed with `node` and `aggregate`.
    #[arg(long)]
    pub dump_dir: Option<PathBuf>,
}

#[derive(Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub design: PathBuf,
    #[arg(long, env = "KNOCKAGG_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Largest acceptable entrywise residual.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Node(a) => commands::node(&a, cli.verbose),
        Command::Aggregate(a) => commands::aggregate(&a, cli.verbose),
        Command::Baseline(a) => commands::baseline(&a, cli.verbose),
        Command::Experiment(a) => commands::experiment(&a, cli.verbose),
        Command::ValidateKnockoffs(a) => commands::check_knockoffs(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
