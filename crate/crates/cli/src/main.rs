mod commands;
mod inputs;
mod recipe;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Exit status for flag and input errors.
const EXIT_USAGE: u8 = 2;
/// Exit status for failures while computing.
const EXIT_COMPUTE: u8 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Compute(#[from] varshap::Error),
}

#[derive(Parser, Debug)]
#[command(name = "varshap", version, about = "Variance-based Shapley attributions and an attribution-quality benchmark")]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Explain one prediction.
    Explain(ExplainArgs),
    /// Reproduce a synthetic case study (1 or 2).
    Casestudy(CaseArgs),
    /// Run the method × model × dataset × metric grid and rank methods.
    Benchmark(BenchArgs),
    /// Score a saved attribution with every metric.
    Metrics(MetricsArgs),
    /// Write a synthetic dataset as CSV.
    Gen(GenArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Method {
    Varshap,
    Kernelshap,
    Lime,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Background {
    Zero,
    Data,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Sign {
    ReductionPositive,
    IncreasePositive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Baseline {
    Uniform,
    Black,
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
        Ok(v) => Err(format!("must be a finite number > 0, got {v}")),
        Err(e) => Err(e.to_string()),
    }
}

fn non_negative(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 0.0 => Ok(v),
        Ok(v) => Err(format!("must be a finite number >= 0, got {v}")),
        Err(e) => Err(e.to_string()),
    }
}

/// A comma-separated vector flag value.
#[derive(Clone, Debug, PartialEq)]
struct Values(Vec<f64>);

fn vector(s: &str) -> Result<Values, String> {
    inputs::parse_vector(s).map(Values)
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// Model JSON file (takes normalized features).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Built-in ground-truth model: dataset1, dataset2 or dataset3.
    #[arg(long)]
    gtm: Option<String>,
    /// Dataset CSV; generated from the seed when omitted with --gtm.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Target column excluded from the features, if present.
    #[arg(long, default_value = "Y")]
    target: String,
    /// Use raw features instead of z-scores fitted on the first 80% of rows.
    #[arg(long)]
    no_normalize: bool,
}

#[derive(Args, Debug)]
struct ExplainArgs {
    #[command(flatten)]
    source: ModelArgs,
    /// Instance in raw feature units, comma separated.
    #[arg(long, value_parser = vector, allow_hyphen_values = true, conflicts_with = "instance_index")]
    instance: Option<Values>,
    /// Explain this data row instead.
    #[arg(long)]
    instance_index: Option<usize>,
    #[arg(long, value_enum)]
    method: Method,
    /// Perturbation scale (standard deviations); default 0.6, LIME 1.0.
    #[arg(long, value_parser = positive, allow_hyphen_values = true)]
    sigma: Option<f64>,
    /// Samples per coalition (VARSHAP, default 4096) or neighbourhood size (LIME, default 1000).
    #[arg(long)]
    samples: Option<usize>,
    /// Coalition budget including the empty and full coalitions; all are
    /// enumerated by default up to 10 features.
    #[arg(long)]
    coalitions: Option<usize>,
    /// Draw fresh Gaussian noise for every coalition.
    #[arg(long)]
    unpaired: bool,
    #[arg(long, value_enum, default_value = "reduction-positive")]
    sign: Sign,
    #[arg(long, value_enum, default_value = "data")]
    background: Background,
    #[arg(long, default_value_t = 100)]
    n_background: usize,
    /// L1 penalty of the LIME surrogate.
    #[arg(long, value_parser = non_negative, allow_hyphen_values = true, default_value = "0")]
    sparsity: f64,
    /// LIME kernel width in standardized units (default 0.75·√d).
    #[arg(long, value_parser = positive, allow_hyphen_values = true)]
    kernel_width: Option<f64>,
    /// Master seed (default: $VARSHAP_SEED, else 0).
    #[arg(long)]
    seed: Option<u64>,
    /// Attribution JSON output (default: standard output).
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Also draw the attribution as an SVG bar chart.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CaseArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    case: u8,
    /// VARSHAP perturbation scale.
    #[arg(long, value_parser = positive, allow_hyphen_values = true, default_value = "0.3")]
    sigma: f64,
    #[arg(long, value_parser = non_negative, allow_hyphen_values = true, default_value = "0.5")]
    sparsity: f64,
    /// Explained point in raw units (default 0,0 for case 1 and 0.3,-0.2,0.8 for case 2).
    #[arg(long, value_parser = vector, allow_hyphen_values = true)]
    point: Option<Values>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for caseN.csv and caseN.svg.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Benchmark JSON config; defaults apply to missing fields.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(short, long)]
    output: PathBuf,
    /// Overrides the config's master_seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    n_instances: Option<u64>,
}

#[derive(Args, Debug)]
struct MetricsArgs {
    #[arg(long)]
    attribution: PathBuf,
    #[command(flatten)]
    source: ModelArgs,
    /// Raw instance, when the attribution does not record one.
    #[arg(long, value_parser = vector, allow_hyphen_values = true)]
    instance: Option<Values>,
    #[arg(long, value_enum, default_value = "uniform")]
    baseline: Baseline,
    /// Add black-baseline faithfulness rows.
    #[arg(long)]
    both_baselines: bool,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    subset_size: Option<usize>,
    /// Metric seed (default: $VARSHAP_SEED, else the attribution's seed).
    #[arg(long)]
    seed: Option<u64>,
    /// CSV output (default: standard output).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=3))]
    dataset: u32,
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path.
    #[arg(long)]
    write: PathBuf,
    /// Write z-scored features instead of raw ones.
    #[arg(long)]
    normalized: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::Explain(a) => commands::explain(a),
        Command::Casestudy(a) => commands::casestudy(a),
        Command::Benchmark(a) => commands::benchmark(a),
        Command::Metrics(a) => commands::metrics(a),
        Command::Gen(a) => commands::gen(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(CliError::Compute(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_COMPUTE)
        }
    }
}
