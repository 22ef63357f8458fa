//! Command implementations behind the `cflens` binary.
//!
//! [`run`] parses arguments, executes one command and maps the outcome to an
//! [`Exit`] code, so tests drive the CLI in-process.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::Error;

pub use config::RunConfig;

/// Process exit status of a command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Success,
    /// I/O failure on an output.
    Failure,
    /// Bad flags, missing or mismatched checkpoints, failed training.
    Validation,
    /// NaN or infinity during training.
    Numeric,
    /// Outputs were written but the report contains undefined scores.
    Undefined,
}

impl Exit {
    pub fn code(self) -> i32 {
        match self {
            Exit::Success => 0,
            Exit::Failure => 1,
            Exit::Validation => 2,
            Exit::Numeric => 3,
            Exit::Undefined => 4,
        }
    }

    pub fn for_error(err: &Error) -> Self {
        match err {
            Error::NonFiniteGradient { .. } | Error::NonFiniteLoss { .. } => Exit::Numeric,
            Error::Io { .. } => Exit::Failure,
            _ => Exit::Validation,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "cflens",
    version,
    about = "Contrastive counterfactual explanations"
)]
pub struct Cli {
    /// JSON file with default paths and experiment parameters; flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic world and print its attribute frequencies.
    GenWorld(GenWorldArgs),
    /// Train the attribute classifier or the shift predictor.
    Train(TrainArgs),
    /// Estimate NEC/SUF scores for a target classifier.
    Explain(ExplainArgs),
    /// Explain a known logistic target and rank-correlate scores with its coefficients.
    Baseline(BaselineArgs),
    /// Dump a single counterfactual pair.
    Counterfactual(CounterfactualArgs),
    /// Train one shift predictor per faithfulness weight and compare efficacy.
    SweepGamma(SweepArgs),
}

/// Output directory; checkpoint paths default to fixed names inside it.
#[derive(Debug, Clone, Args)]
pub struct OutArgs {
    /// Output directory, created if missing [default: .]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CheckpointArgs {
    /// World checkpoint [default: <out>/world.json]
    #[arg(long)]
    pub world: Option<PathBuf>,
    /// Attribute classifier checkpoint [default: <out>/attributes.json]
    #[arg(long)]
    pub attributes: Option<PathBuf>,
    /// Shift predictor checkpoint [default: <out>/shifter.json]
    #[arg(long)]
    pub shifter: Option<PathBuf>,
    /// Replace the shift predictor with the world's exact oracle.
    #[arg(long)]
    pub oracle_shifts: bool,
}

#[derive(Debug, Clone, Args)]
pub struct GenWorldArgs {
    #[command(flatten)]
    pub out: OutArgs,
    #[arg(long, default_value_t = 16)]
    pub d: usize,
    #[arg(long, default_value_t = 4)]
    pub m: usize,
    #[arg(long, default_value_t = 64)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.5)]
    pub margin: f64,
    /// Latents drawn for the frequency table.
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Which {
    Attributes,
    Shifter,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    pub which: Which,
    #[command(flatten)]
    pub out: OutArgs,
    #[command(flatten)]
    pub checkpoints: CheckpointArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Attribute classifier epochs.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Shift predictor iterations.
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub p_unset: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct PopulationArgs {
    /// Population size.
    #[arg(long)]
    pub population: Option<usize>,
    /// Population seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Subgroup constraint such as `attr0=1&attr3=0`.
    #[arg(long, default_value = "")]
    pub context: String,
    /// Also require the factual attribute class opposite to the requested one.
    #[arg(long)]
    pub condition_on_factual_attribute: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ExplainArgs {
    #[command(flatten)]
    pub out: OutArgs,
    #[command(flatten)]
    pub checkpoints: CheckpointArgs,
    /// Target classifier checkpoint [default: <out>/target.json]
    #[arg(long)]
    pub target: Option<PathBuf>,
    #[command(flatten)]
    pub population: PopulationArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BaselineArgs {
    #[command(flatten)]
    pub out: OutArgs,
    #[command(flatten)]
    pub checkpoints: CheckpointArgs,
    /// Comma-separated logistic coefficients, one per attribute.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub beta: Option<Vec<f64>>,
    #[arg(long, allow_hyphen_values = true)]
    pub beta0: Option<f64>,
    #[command(flatten)]
    pub population: PopulationArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CounterfactualArgs {
    #[command(flatten)]
    pub out: OutArgs,
    #[command(flatten)]
    pub checkpoints: CheckpointArgs,
    /// Target classifier checkpoint [default: <out>/target.json]
    #[arg(long)]
    pub target: Option<PathBuf>,
    /// Requested attribute changes such as `attr2=+1,attr4=-1`.
    #[arg(long, allow_hyphen_values = true)]
    pub intervention: String,
    #[arg(long, default_value_t = 0)]
    pub latent_seed: u64,
    #[arg(long, default_value_t = 0)]
    pub index: u64,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub out: OutArgs,
    #[command(flatten)]
    pub checkpoints: CheckpointArgs,
    /// Comma-separated faithfulness weights.
    #[arg(long, value_delimiter = ',')]
    pub gammas: Option<Vec<f64>>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Held-out latents per efficacy evaluation.
    #[arg(long, default_value_t = 500)]
    pub eval_samples: usize,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> Exit
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                Exit::Validation
            } else {
                Exit::Success
            };
        }
    };
    execute(cli)
}

/// Runs a parsed command inside a worker pool capped by `CFLENS_THREADS`.
pub fn execute(cli: Cli) -> Exit {
    let threads = match std::env::var("CFLENS_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => n,
            _ => {
                eprintln!("error: CFLENS_THREADS must be a positive integer, got {v:?}");
                return Exit::Validation;
            }
        },
        Err(_) => 0,
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return Exit::Failure;
        }
    };
    match pool.install(|| commands::dispatch(cli)) {
        Ok(exit) => exit,
        Err(e) => {
            eprintln!("error: {e}");
            Exit::for_error(&e)
        }
    }
}
