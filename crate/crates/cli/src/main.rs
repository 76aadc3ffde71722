mod commands;
mod manifest;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cqrnn_core::algo::{CrossingRule, Method};
use cqrnn_core::Error;

#[derive(Parser, Debug)]
#[command(name = "cqrnn", version, about = "Censored quantile regression experiments")]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic dataset (train, test, truth CSVs and a manifest).
    GenData(GenDataArgs),
    /// Train one model and write its checkpoint, loss log and metrics.
    Train(TrainArgs),
    /// Run every (dataset, method, seed) cell of a manifest.
    Benchmark(BenchmarkArgs),
    /// Run one of the fixed ablation sweeps.
    Ablate(AblateArgs),
    /// Emit quantile-fan CSVs and a markdown table from a benchmark directory.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct GenDataArgs {
    #[arg(long)]
    name: String,
    #[arg(long)]
    n_train: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Grid size for the truth CSV; defaults by training size.
    #[arg(long)]
    grid_size: Option<usize>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

/// Training options shared by `train` and `benchmark`; flags override the manifest.
#[derive(Args, Debug, Default, Clone)]
struct TrainFlags {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    grid_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Pseudo-value multiplier of the largest training label.
    #[arg(long)]
    ystar_multiple: Option<f64>,
    #[arg(long)]
    dropout: bool,
    #[arg(long)]
    crossing_weight: Option<f64>,
    /// Crossing test of the sequential grid: `printed` or `conventional`.
    #[arg(long, value_parser = parse_crossing_rule)]
    crossing_rule: Option<CrossingRule>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long, value_parser = parse_method)]
    method: Method,
    /// Synthetic dataset name, regenerated from `--seed`.
    #[arg(long, conflicts_with = "train")]
    dataset: Option<String>,
    /// Training CSV (x0.., y, delta).
    #[arg(long)]
    train: Option<PathBuf>,
    /// Test CSV; without it the training CSV is split 80/20.
    #[arg(long, requires = "train")]
    test: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    flags: TrainFlags,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct BenchmarkArgs {
    /// Manifest JSON describing datasets, methods, seeds and config.
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory; overrides the manifest's `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the CQRNN_WORKERS environment variable.
    #[arg(long, env = cqrnn_core::harness::WORKERS_ENV)]
    workers: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[command(flatten)]
    flags: TrainFlags,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum AblationKind {
    Grid,
    Ystar,
    Crossing,
}

#[derive(Args, Debug)]
struct AblateArgs {
    #[arg(value_enum)]
    kind: AblationKind,
    /// Synthetic dataset names; defaults depend on the sweep.
    #[arg(long, value_delimiter = ',')]
    datasets: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4,5,6,7,8,9")]
    seeds: Vec<u64>,
    #[arg(long, value_delimiter = ',')]
    grid_sizes: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    train_sizes: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    multiples: Option<Vec<f64>>,
    #[arg(long, env = cqrnn_core::harness::WORKERS_ENV)]
    workers: Option<usize>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Directory written by `benchmark`.
    runs_dir: PathBuf,
    /// Output directory; defaults to `<runs_dir>/report`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit non-zero when any checkpoint is missing.
    #[arg(long)]
    strict: bool,
}

fn parse_crossing_rule(s: &str) -> Result<CrossingRule, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown crossing rule `{s}` (expected printed or conventional)"))
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::GenData(a) => commands::gen_data(a),
        Command::Train(a) => commands::train(a),
        Command::Benchmark(a) => commands::benchmark(a),
        Command::Ablate(a) => commands::ablate(a),
        Command::Report(a) => commands::report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
