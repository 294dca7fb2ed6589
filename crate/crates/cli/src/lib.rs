//! The `convonet` command line: training, evaluation, and the experiment
//! harnesses (ablation grid, few-shot sweep, m study, dataset statistics,
//! table comparison, gradient check).

use std::fmt;
use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod pipeline;
pub mod results;

pub use config::RunConfig;

/// A problem with the user's flags, files, or data (exit code 2).
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub const EXIT_OK: u8 = 0;
pub const EXIT_INTERNAL: u8 = 1;
pub const EXIT_USER: u8 = 2;

/// 2 for user-input errors, 1 for everything else.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return EXIT_USER;
        }
        if let Some(e) = cause.downcast_ref::<convonet_core::Error>() {
            return if e.is_user_error() { EXIT_USER } else { EXIT_INTERNAL };
        }
        if cause.is::<std::io::Error>() || cause.is::<csv::Error>() {
            return EXIT_USER;
        }
    }
    EXIT_INTERNAL
}

#[derive(Debug, Parser)]
#[command(name = "convonet", version, about = "Paragraph CNN text classifiers: train, evaluate, and compare")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one model and write a checkpoint, per-epoch CSV, and manifest.
    Train(RunConfig),
    /// Score a checkpoint on a test CSV.
    Evaluate(RunConfig),
    /// Train and evaluate the ablation versions V1.1 to V4.6.
    Gridsearch(RunConfig),
    /// Test error rate when training on stratified fractions of the data.
    Fewshot(RunConfig),
    /// Metrics and training time for m scaled by each fraction.
    Mstudy(RunConfig),
    /// Corpus statistics of a dataset CSV.
    Stats {
        #[command(flatten)]
        run: RunConfig,
        /// Dataset CSV (defaults to --train-csv).
        path: Option<PathBuf>,
    },
    /// Wilcoxon signed-rank comparison of two `dataset,metric,value` tables.
    Compare {
        #[command(flatten)]
        run: RunConfig,
        results_a: PathBuf,
        results_b: PathBuf,
    },
    /// Finite-difference check of the analytic gradients on a tiny model.
    Gradcheck {
        #[command(flatten)]
        run: RunConfig,
        #[command(flatten)]
        grad: GradArgs,
    },
}

#[derive(Debug, Clone, Args)]
pub struct GradArgs {
    /// Embedding depth z.
    #[arg(long, default_value_t = 3)]
    pub depth: usize,
    #[arg(long, default_value_t = 2)]
    pub filters: usize,
    #[arg(long, default_value_t = 8)]
    pub dense_units: usize,
    #[arg(long, default_value_t = 2)]
    pub classes: usize,
    /// Random inputs to differentiate at.
    #[arg(long, default_value_t = 3)]
    pub examples: usize,
    /// Minimum number of (example, parameter) points.
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tolerance: f64,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(c) => commands::cmd_train(&c.resolve()?).map(drop),
        Command::Evaluate(c) => commands::cmd_evaluate(&c.resolve()?).map(drop),
        Command::Gridsearch(c) => commands::cmd_gridsearch(&c.resolve()?).map(drop),
        Command::Fewshot(c) => commands::cmd_fewshot(&c.resolve()?).map(drop),
        Command::Mstudy(c) => commands::cmd_mstudy(&c.resolve()?).map(drop),
        Command::Stats { run, path } => commands::cmd_stats(&run.resolve()?, path.as_deref()).map(drop),
        Command::Compare { run, results_a, results_b } => {
            commands::cmd_compare(&run.resolve()?, &results_a, &results_b).map(drop)
        }
        Command::Gradcheck { run, grad } => commands::cmd_gradcheck(&run.resolve()?, &grad).map(drop),
    }
}
