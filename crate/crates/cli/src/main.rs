use std::path::PathBuf;
use std::process::exit;

use causegraph_cli::stages::{QueryMode, Stage, StageArgs};
use causegraph_cli::{config, run_stage, CliError};
use clap::error::ErrorKind;
use clap::Parser;

/// Build a temporal knowledge graph from a timestamped corpus, train node
/// embeddings, retrieve causal context for queries, generate answers with
/// and without that context, and compare them.
#[derive(Parser, Debug)]
#[command(name = "causegraph", version, about, long_about = None)]
struct Cli {
    /// Pipeline stage to run
    #[arg(value_enum)]
    stage: Stage,

    /// JSON configuration file
    #[arg(long)]
    config: PathBuf,

    /// Override the global seed
    #[arg(long)]
    seed: Option<u64>,

    /// Which answer mode(s) the query stage produces
    #[arg(long, value_enum, default_value = "both")]
    mode: QueryMode,

    /// Ad-hoc query text (alternative to --cases)
    #[arg(long)]
    query: Option<String>,

    /// Cases file (JSONL: {"qid","query","truth"})
    #[arg(long)]
    cases: Option<PathBuf>,

    /// Write a retrieval trace (explain.jsonl) alongside the answers
    #[arg(long)]
    explain: bool,

    /// Force the offline path: local encoder, rule extractor, echo generator
    #[arg(long)]
    mock_llm: bool,

    /// Override retrieval.k_contextual
    #[arg(long)]
    k: Option<usize>,

    /// Override retrieval.sim_threshold
    #[arg(long)]
    threshold: Option<f64>,

    /// Override walk.temporal (true|false)
    #[arg(long)]
    temporal: Option<bool>,

    /// Dotted-path config override, e.g. --set train.dim=64 (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Aggregate a pre-computed scores CSV instead of scoring answers (eval only)
    #[arg(long)]
    from_scores: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<serde_json::Value, CliError> {
    let mut cfg = config::load_config(&cli.config, &cli.set)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.mock_llm {
        cfg.force_mock_llm();
    }
    if let Some(k) = cli.k {
        cfg.retrieval.k_contextual = k;
    }
    if let Some(threshold) = cli.threshold {
        cfg.retrieval.sim_threshold = threshold;
    }
    if let Some(temporal) = cli.temporal {
        cfg.walk.temporal = Some(temporal);
    }
    cfg.validate()?;

    let args = StageArgs {
        mode: cli.mode,
        query: cli.query,
        cases: cli.cases,
        explain: cli.explain,
        from_scores: cli.from_scores,
    };
    run_stage(cli.stage, &cfg, &args)
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => match err.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                let _ = err.print();
                exit(0);
            }
            _ => {
                let _ = err.print();
                exit(1);
            }
        },
    };
    match run(cli) {
        Ok(summary) => println!("{summary}"),
        Err(err) => {
            eprintln!("error: {err}");
            exit(err.exit_code());
        }
    }
}
