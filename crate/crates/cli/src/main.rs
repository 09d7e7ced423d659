//! `hintkit`: dataset management, hint generation, evaluation and reports.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "hintkit",
    version,
    about = "Generate and evaluate hints for factoid questions"
)]
struct Cli {
    /// Config file (TOML). Defaults to $HINTKIT_CONFIG, then ~/.config/hintkit/config.toml.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Never touch the network; remote methods and downloads fail upfront.
    #[arg(long, global = true)]
    offline: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Registry listing, download, validation and format conversion.
    #[command(subcommand)]
    Dataset(DatasetCmd),
    /// Append model-generated hints to every instance.
    Generate(GenerateArgs),
    /// Score hints (and optionally questions/answers) with configured methods.
    Evaluate(EvaluateArgs),
    /// Per-subset metric means.
    Report(ReportArgs),
}

#[derive(Subcommand)]
enum DatasetCmd {
    /// Print the registry's datasets and subsets.
    List {
        /// Refetch the manifest instead of using the cached copy.
        #[arg(long)]
        update: bool,
    },
    /// Print subset statistics for one registry dataset.
    Info {
        name: String,
        #[arg(long)]
        update: bool,
    },
    /// Download, verify and cache a registry dataset.
    Download {
        name: String,
        /// Also write the dataset here (.json or .hds).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Check a dataset file and print every violation.
    Validate { file: PathBuf },
    /// Convert between canonical JSON and the archive format (by extension).
    Convert { input: PathBuf, output: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Aware,
    Agnostic,
}

#[derive(Args)]
struct GenerateArgs {
    input: PathBuf,
    output: PathBuf,
    #[arg(long, value_enum)]
    mode: ModeArg,
    /// Hints per instance.
    #[arg(long)]
    n_hints: Option<usize>,
    /// Chat model name.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Prompt template file; `question`, `answer` and `n` in braces are substituted.
    #[arg(long)]
    template: Option<PathBuf>,
    /// Remove existing hints before appending new ones.
    #[arg(long)]
    replace: bool,
    /// In aware mode, leave answerless instances alone instead of failing.
    #[arg(long)]
    skip_missing: bool,
    /// Keep hints that contain an answer verbatim (aware mode).
    #[arg(long)]
    no_leak_filter: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    input: PathBuf,
    output: PathBuf,
    /// Comma-separated `metric/method[/variant][@target+target]` list.
    #[arg(long)]
    metrics: Option<String>,
    /// Recompute results that are already present.
    #[arg(long)]
    overwrite: bool,
    /// Word familiarity table (token<TAB>value).
    #[arg(long)]
    freq_table: Option<PathBuf>,
    /// Static word vectors (word followed by its components, one per line).
    #[arg(long)]
    vectors: Option<PathBuf>,
    /// Linear readability scorer as LABEL=PATH; repeatable.
    #[arg(long = "scorer", value_name = "LABEL=PATH")]
    scorers: Vec<String>,
    /// Remote scoring endpoint as METHOD=URL; repeatable.
    #[arg(long = "remote-scorer", value_name = "METHOD=URL")]
    remote_scorers: Vec<String>,
    /// Chat model name for LLM-judged methods.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    workers: Option<usize>,
    /// Print a counter while scoring.
    #[arg(long)]
    progress: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
    Md,
}

#[derive(Args)]
struct ReportArgs {
    input: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    /// One row per (subset, metric) with full-precision means and counts.
    #[arg(long)]
    long: bool,
    /// Write here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
