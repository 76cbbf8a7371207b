//! `rpeclu` — random-projection ensemble clustering from the command line.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rpeclu::commands::{cmd_bench, cmd_cluster, cmd_generate, BenchSpec};
use rpeclu::{CliError, InputSource, RunManifest};
use rpeclu_core::{CovarianceStructure, RegressionChoice, RpecluConfig};

#[derive(Parser)]
#[command(
    name = "rpeclu",
    version,
    about = "Random-projection ensemble clustering for high-dimensional data",
    long_about = "Fits Gaussian mixtures on many random low-dimensional projections of the \
                  input, ranks the projections by a composite BIC, and aggregates the \
                  best-scoring partitions into a consensus clustering. All randomness flows \
                  from --seed, so runs are reproducible byte for byte."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster a CSV file or a built-in scenario and write the partition,
    /// the projection ranking and run diagnostics
    Cluster(ClusterArgs),
    /// Write a synthetic benchmark dataset as CSV with a truth column
    Generate(GenerateArgs),
    /// Compare the ensemble against a k-means baseline over scenario
    /// replicates, writing a plot-ready table
    Bench(BenchArgs),
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum CovArg {
    Full,
    Diagonal,
    Spherical,
}

impl From<CovArg> for CovarianceStructure {
    fn from(v: CovArg) -> Self {
        match v {
            CovArg::Full => CovarianceStructure::Full,
            CovArg::Diagonal => CovarianceStructure::Diagonal,
            CovArg::Spherical => CovarianceStructure::Spherical,
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum RegArg {
    Auto,
    Full,
    Diagonal,
}

impl From<RegArg> for RegressionChoice {
    fn from(v: RegArg) -> Self {
        match v {
            RegArg::Auto => RegressionChoice::Auto,
            RegArg::Full => RegressionChoice::Full,
            RegArg::Diagonal => RegressionChoice::Diagonal,
        }
    }
}

#[derive(Args)]
struct ClusterArgs {
    /// Input CSV: rows are observations, columns are features, optional
    /// header detected automatically
    #[arg(long, conflicts_with = "scenario")]
    input: Option<PathBuf>,

    /// Built-in scenario id (1..=26) instead of a file
    #[arg(long)]
    scenario: Option<usize>,

    /// Output directory for partition.csv, ranking.tsv, diagnostics.json
    #[arg(long)]
    out: PathBuf,

    /// Number of clusters; defaults to the scenario's group count when
    /// --scenario is used
    #[arg(long)]
    g: Option<usize>,

    /// Projection dimension; defaults to round(10 ln g) + 1
    #[arg(long)]
    d: Option<usize>,

    /// Number of random projections
    #[arg(long, default_value_t = 1000)]
    b: usize,

    /// Number of top-scoring projections kept for the consensus
    #[arg(long = "b-star", default_value_t = 100)]
    b_star: usize,

    /// Master seed for all randomness
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Mixture covariance structure
    #[arg(long, value_enum, default_value_t = CovArg::Full)]
    cov: CovArg,

    /// Residual covariance structure for the complement regression
    #[arg(long, value_enum, default_value_t = RegArg::Auto)]
    reg: RegArg,

    /// Cap on worker threads (default: one per logical CPU)
    #[arg(long)]
    threads: Option<usize>,

    /// Name (or 0-based index) of a ground-truth label column to exclude
    /// from the features and score against
    #[arg(long = "truth-col")]
    truth_col: Option<String>,
}

#[derive(Args)]
struct GenerateArgs {
    /// Scenario id, 1..=26
    #[arg(long)]
    scenario: usize,

    /// Seed for the dataset draw
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated scenario ids, e.g. 1,2,13
    #[arg(long, value_delimiter = ',', required = true)]
    scenarios: Vec<usize>,

    /// Replicates per scenario
    #[arg(long, default_value_t = 1)]
    replicates: usize,

    /// Output directory for bench.tsv
    #[arg(long)]
    out: PathBuf,

    /// Number of random projections per run
    #[arg(long, default_value_t = 1000)]
    b: usize,

    /// Number of top-scoring projections kept per run
    #[arg(long = "b-star", default_value_t = 100)]
    b_star: usize,

    /// Projection dimension override (default derives from each scenario)
    #[arg(long)]
    d: Option<usize>,

    /// Master seed
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Cap on worker threads
    #[arg(long)]
    threads: Option<usize>,

    /// Restarts for the k-means baseline
    #[arg(long, default_value_t = 5)]
    kmeans_starts: usize,
}

fn cluster(args: ClusterArgs) -> Result<(), CliError> {
    let input = match (args.input, args.scenario) {
        (Some(path), None) => InputSource::CsvPath(path),
        (None, Some(id)) => InputSource::Scenario(id),
        (None, None) => {
            return Err(CliError::Config("give exactly one of --input or --scenario".into()))
        }
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    };
    let g = match (args.g, &input) {
        (Some(g), _) => g,
        (None, InputSource::Scenario(id)) => rpeclu_core::scenario_table(*id)?.g,
        (None, InputSource::CsvPath(_)) => {
            return Err(CliError::Config("--g is required for CSV input".into()))
        }
    };
    let mut config = RpecluConfig::new(g);
    config.d = args.d;
    config.b = args.b;
    config.b_star = args.b_star;
    config.seed = args.seed;
    config.gmm_cov = args.cov.into();
    config.reg_structure = args.reg.into();

    let manifest = RunManifest {
        input,
        config,
        out_dir: args.out,
        truth_column: args.truth_col,
        threads: args.threads,
    };
    cmd_cluster(&manifest)
}

fn bench(args: BenchArgs) -> Result<(), CliError> {
    let spec = BenchSpec {
        scenarios: args.scenarios,
        replicates: args.replicates,
        b: args.b,
        b_star: args.b_star,
        d: args.d,
        seed: args.seed,
        threads: args.threads,
        kmeans_starts: args.kmeans_starts,
    };
    cmd_bench(&spec, &args.out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Cluster(args) => cluster(args),
        Command::Generate(args) => cmd_generate(args.scenario, args.seed, &args.out),
        Command::Bench(args) => bench(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
