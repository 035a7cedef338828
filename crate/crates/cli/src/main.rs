mod commands;
mod suite;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fairmeta_core::evaluation::Averaging;
use fairmeta_core::record::{Cohort, Condition, Source};

/// Metadata standardization and retrieval evaluation pipeline.
#[derive(Debug, Parser)]
#[command(name = "fairmeta", version)]
struct Cli {
    /// Base directory for every relative path.
    #[arg(long, global = true, default_value = ".")]
    workdir: PathBuf,

    /// Log more (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fetch raw payloads for cohort queries into a raw cache.
    Ingest(IngestArgs),
    /// Parse cached payloads and draw a seeded uniform sample per cohort.
    Sample(SampleArgs),
    /// Correct corpora under a guidance condition.
    Standardize(StandardizeArgs),
    /// Write gold tissue labels for a corpus.
    Label(LabelArgs),
    /// Run a `field:value` query against a corpus.
    Search(SearchArgs),
    /// Evaluate retrieval across conditions and write a report.
    Evaluate(EvaluateArgs),
    /// Serve corpora and reports over HTTP.
    Serve(ServeArgs),
    /// Print the prompt built for one record.
    Prompt(PromptArgs),
}

#[derive(Debug, Args)]
struct IngestArgs {
    #[arg(long, value_parser = parse_source)]
    source: Vec<Source>,
    #[arg(long, value_parser = parse_cohort)]
    cohort: Vec<Cohort>,
    /// Maximum records per cohort query.
    #[arg(long, default_value_t = 1000)]
    limit: usize,
    /// Read payloads from a directory laid out as `raw/<source>/<cohort>/<id>`.
    #[arg(long, conflicts_with = "live", required_unless_present = "live")]
    fixtures: Option<PathBuf>,
    /// Query NCBI E-utilities over the network.
    #[arg(long)]
    live: bool,
    #[arg(long, default_value = fairmeta_core::ingest::DEFAULT_EUTILS_BASE)]
    base_url: String,
    #[arg(long, default_value = "cache")]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct SampleArgs {
    /// Raw cache root (containing `raw/`).
    #[arg(long, default_value = "cache")]
    raw: PathBuf,
    #[arg(long, value_parser = parse_source)]
    source: Vec<Source>,
    #[arg(long, value_parser = parse_cohort)]
    cohort: Vec<Cohort>,
    #[arg(long, default_value_t = 1000)]
    initial: usize,
    #[arg(long, default_value_t = 800)]
    target: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value = "corpora/baseline")]
    out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ConditionArg {
    Baseline,
    Dd,
    Cedar,
}

impl From<ConditionArg> for Condition {
    fn from(c: ConditionArg) -> Self {
        match c {
            ConditionArg::Baseline => Condition::Baseline,
            ConditionArg::Dd => Condition::Dd,
            ConditionArg::Cedar => Condition::Cedar,
        }
    }
}

#[derive(Debug, Args)]
struct StandardizeArgs {
    /// Corpus files; directories contribute every corpus file inside.
    #[arg(long, required = true)]
    corpus: Vec<PathBuf>,
    #[arg(long, value_enum)]
    condition: ConditionArg,
    /// `rule`, `replay`, `live`, or a backend config file (JSON or TOML).
    #[arg(long, default_value = "rule")]
    backend: String,
    /// Replay cache directory when `--backend replay`.
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    max_inflight: Option<usize>,
    /// Template JSON overriding the bundled BioSample template.
    #[arg(long)]
    template: Option<PathBuf>,
    /// Data dictionary overriding the bundled one.
    #[arg(long)]
    dictionary: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct LabelArgs {
    #[arg(long, required = true)]
    corpus: Vec<PathBuf>,
    #[arg(long, default_value = "labels")]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct SearchArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Query as `field:value`.
    query: String,
    /// Compare stored bytes (trimmed) instead of canonical values.
    #[arg(long)]
    strict_case: bool,
    /// Also write results and a manifest here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Suite description (TOML).
    #[arg(long, required_unless_present = "corpora")]
    suite: Option<PathBuf>,
    /// Corpus files or directories, used instead of a suite.
    #[arg(long, conflicts_with = "suite")]
    corpora: Vec<PathBuf>,
    #[arg(long, value_parser = parse_averaging)]
    averaging: Option<Averaging>,
    /// Defaults to `reports/<timestamp>`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, default_value = "data")]
    data_dir: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    listen: SocketAddr,
    /// Static UI build served under `/ui`.
    #[arg(long)]
    ui: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PromptArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    id: String,
    #[arg(long, value_enum)]
    condition: ConditionArg,
    /// Print only the SHA-256 used as the replay cache key.
    #[arg(long)]
    hash: bool,
}

fn parse_source(s: &str) -> Result<Source, String> {
    s.parse().map_err(|_| format!("unknown source `{s}` (biosample, geo)"))
}

fn parse_cohort(s: &str) -> Result<Cohort, String> {
    s.parse().map_err(|_| format!("unknown cohort `{s}` (lung, liver, ovarian)"))
}

fn parse_averaging(s: &str) -> Result<Averaging, String> {
    s.parse()
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => tracing::Level::WARN,
        1 => tracing::Level::INFO,
        _ => tracing::Level::DEBUG,
    };
    tracing_subscriber::fmt()
        .with_max_level(level)
        .with_writer(std::io::stderr)
        .with_target(false)
        .init();
}

fn is_broken_pipe(err: &anyhow::Error) -> bool {
    err.chain()
        .filter_map(|e| e.downcast_ref::<std::io::Error>())
        .any(|e| e.kind() == std::io::ErrorKind::BrokenPipe)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    init_logging(cli.verbose);
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) if is_broken_pipe(&err) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
