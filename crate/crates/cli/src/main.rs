mod commands;
mod config;
mod partspec;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "grridge", version, about = "Group-regularized ridge regression with co-data")]
struct Cli {
    /// Worker threads for folds and replicates (0 = all cores). Results do
    /// not depend on this.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a model and write it with its CVL trace and multiplier table.
    Fit(FitArgs),
    /// Cross-validated evaluation of the full pipeline, or of a saved model.
    Eval(EvalArgs),
    /// Score new samples with a saved model.
    Predict(PredictArgs),
    /// Write a simulated dataset with known group variances.
    Simulate(SimulateArgs),
    /// Post-hoc variable selection on a saved model.
    Select(SelectArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Flat key=value file; flags take precedence over it.
    #[arg(long)]
    pub config: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct DataArgs {
    /// Sample-by-variable CSV with a `sample_id` first column.
    #[arg(long)]
    pub x: Option<String>,
    /// Two-column `sample_id,y` CSV.
    #[arg(long)]
    pub y: Option<String>,
    /// binary or continuous.
    #[arg(long)]
    pub family: Option<String>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct PipelineArgs {
    /// Co-data TSV: `variable_id` then one column per source.
    #[arg(long)]
    pub codata: Option<String>,
    /// Comma-separated `kind:column[:param=value...]` specs.
    #[arg(long)]
    pub partitions: Option<String>,
    /// Fixed global penalty; tuned by cross-validation when absent.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// system or iterative.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Inner folds for CVL: a count or `loo`.
    #[arg(long)]
    pub folds: Option<String>,
    #[arg(long)]
    pub stratify: Option<bool>,
    /// Minimum CVL gain for a step to be kept.
    #[arg(long)]
    pub cvl_tolerance: Option<f64>,
    /// Run post-hoc selection with this maximum size.
    #[arg(long)]
    pub p_max: Option<usize>,
    #[arg(long)]
    pub q_marg: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Args, Debug, Clone)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Evaluate this saved model on the data instead of cross-validating the pipeline.
    #[arg(long)]
    pub model: Option<String>,
    /// Outer folds: a count or `loo`.
    #[arg(long)]
    pub cv: Option<String>,
}

#[derive(Args, Debug, Clone)]
pub struct PredictArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub x: Option<String>,
    /// Use the selected submodel.
    #[arg(long)]
    pub use_selection: Option<bool>,
}

#[derive(Args, Debug, Clone)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub groups: Option<usize>,
    #[arg(long)]
    pub group_size: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub n_test: Option<usize>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub signal_skew: Option<f64>,
    #[arg(long)]
    pub sparsity: Option<f64>,
    #[arg(long)]
    pub signal_var: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct SelectArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub p_max: Option<usize>,
    #[arg(long)]
    pub q_marg: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    let result = match cli.command {
        Command::Fit(a) => commands::fit(a),
        Command::Eval(a) => commands::eval(a),
        Command::Predict(a) => commands::predict(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Select(a) => commands::select(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
