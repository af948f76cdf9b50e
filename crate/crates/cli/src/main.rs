//! `itemrank`: rank, mine, generate and run experiments from the command line.
//!
//! Exit codes: 0 success, 1 malformed input, 2 solver non-convergence (the
//! output is still written, with error markers), 3 I/O failure, 4 invalid
//! arguments, 5 other computation errors. Errors are reported as a single `itemrank: error[<kind>]: …`
//! line on stderr.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::CliError;

#[derive(Parser, Debug)]
#[command(name = "itemrank", version, about = "Maximum-entropy significance ranking of itemsets")]
struct Cli {
    /// Worker threads (default: available parallelism). ITEMRANK_THREADS wins over this flag.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Rank itemsets under one or more maxent models.
    Rank(RankArgs),
    /// Mine almost non-derivable itemsets and print them as a family file.
    Mine(MineArgs),
    /// Generate a synthetic dataset.
    Synth(SynthArgs),
    /// Mine a query family and emit every summary table.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum InputFormat {
    /// One transaction per line, whitespace-separated item IDs.
    Fimi,
    /// One row per line of 0/1 characters.
    Dense,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Default)]
enum OutFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct InputArgs {
    /// Dataset file.
    #[arg(long)]
    input: PathBuf,
    /// Input format; inferred from a `.dense` extension, otherwise FIMI.
    #[arg(long, value_enum)]
    format: Option<InputFormat>,
    /// Keep only the first N rows.
    #[arg(long)]
    max_rows: Option<usize>,
    /// Keep only the N most frequent attributes.
    #[arg(long)]
    max_cols: Option<usize>,
}

#[derive(Args, Debug)]
struct SolverArgs {
    /// Largest tolerated marginal violation of the maxent fit.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Iterative-scaling sweep cap.
    #[arg(long, default_value_t = 100_000)]
    max_sweeps: usize,
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// Output file (default: stdout). For `experiment`, a directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    out_format: OutFormat,
}

#[derive(Args, Debug)]
struct RankArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Comma-separated models: ind, cov, all, tree, greedy.
    #[arg(long, value_delimiter = ',', default_value = "ind")]
    model: Vec<String>,
    /// Query itemset as raw item IDs, e.g. "3 7 12". Repeatable.
    #[arg(long)]
    itemset: Vec<String>,
    /// Family file of query itemsets (one per line, raw IDs).
    #[arg(long)]
    queries: Option<PathBuf>,
    /// Rank every nonempty itemset of size ≤ --max-size.
    #[arg(long)]
    all_itemsets: bool,
    #[arg(long, default_value_t = 3)]
    max_size: usize,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct MineArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Minimum bound width in transactions (0: strictly positive width).
    #[arg(long, default_value_t = 5)]
    n: u64,
    #[arg(long, default_value_t = 3)]
    max_size: usize,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct GenArgs {
    /// Generator: ind (independent columns) or copy (noisy copy chain).
    #[arg(long, default_value = "ind")]
    generator: String,
    #[arg(long)]
    attrs: Option<usize>,
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[command(flatten)]
    gen: GenArgs,
    /// Output dataset format.
    #[arg(long, value_enum, default_value_t = InputFormat::Dense)]
    format: InputFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    /// Dataset file; without it a synthetic dataset is generated.
    #[arg(long, conflicts_with_all = ["generator", "attrs", "rows", "seed", "full_scale"])]
    input: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<InputFormat>,
    #[arg(long)]
    max_rows: Option<usize>,
    #[arg(long)]
    max_cols: Option<usize>,
    #[arg(long)]
    generator: Option<String>,
    #[arg(long)]
    attrs: Option<usize>,
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Use the full synthetic size (100 attributes, 5000 rows).
    #[arg(long)]
    full_scale: bool,
    /// Bound width threshold of the query family (default 5, or 100 for copy).
    #[arg(long)]
    n: Option<u64>,
    #[arg(long, default_value_t = 3)]
    max_size: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Comma-separated measures (default: all).
    #[arg(long, value_delimiter = ',')]
    measures: Vec<String>,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    output: OutputArgs,
}

fn configure_threads(flag: Option<usize>) -> Result<(), CliError> {
    let env = match std::env::var("ITEMRANK_THREADS") {
        Ok(v) => Some(
            v.trim()
                .parse::<usize>()
                .map_err(|_| CliError::Usage(format!("ITEMRANK_THREADS: invalid thread count {v:?}")))?,
        ),
        Err(_) => None,
    };
    if let Some(n) = env.or(flag) {
        if n == 0 {
            return Err(CliError::Usage("thread count must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads(cli.threads)?;
    match cli.command {
        Command::Rank(a) => commands::rank(a),
        Command::Mine(a) => commands::mine(a),
        Command::Synth(a) => commands::synth(a),
        Command::Experiment(a) => commands::experiment(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.kind().to_string();
            let detail = e.to_string();
            let first = detail
                .lines()
                .find(|l| l.starts_with("error:"))
                .map(|l| l.trim_start_matches("error:").trim().to_string())
                .unwrap_or(msg);
            return report(CliError::Usage(first));
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(e),
    }
}

fn report(e: CliError) -> ExitCode {
    let msg = e.to_string().replace(['\n', '\r'], " ");
    eprintln!("itemrank: error[{}]: {msg}", e.kind());
    ExitCode::from(e.code())
}
