//! Pipeline stages over a shared artifact directory.
//!
//! Stages run in dependency order — ingest, extract, build, then embed and
//! index, then query and eval — each writing its artifacts plus a manifest
//! entry. A stage refuses to run when its prerequisites are absent or no
//! longer match the hashes their producing stages recorded.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use causegraph::corpus::{self, ContractionDictionary, Tweet};
use causegraph::encode::TripleIndex;
use causegraph::evalkit::{self, EvalCase};
use causegraph::extraction::{
    remote_extract, rule_extract, ExtractorClient, Extraction, RelationLexicon, Triple,
};
use causegraph::generate::{self, Answer, Mode, PromptTemplate};
use causegraph::kgstore::TemporalGraph;
use causegraph::n2v::{self, EmbeddingMatrix};
use causegraph::retrieve::{retrieve_for_query, RetrievalTrace};
use serde_json::json;

use crate::config::{ExtractorConfig, PipelineConfig};
use crate::manifest::{hash_bytes, hash_file, Manifest, StageEntry};
use crate::CliError;

pub const TWEETS_FILE: &str = "tweets.jsonl";
pub const TRIPLES_FILE: &str = "triples.jsonl";
pub const NODES_FILE: &str = "nodes.jsonl";
pub const EDGES_FILE: &str = "edges.jsonl";
pub const EMBEDDINGS_FILE: &str = "embeddings.json";
pub const INDEX_FILE: &str = "triple_index.json";
pub const ANSWERS_FILE: &str = "answers.jsonl";
pub const EXPLAIN_FILE: &str = "explain.jsonl";
pub const REPORT_FILE: &str = "report.json";
pub const SCORES_FILE: &str = "scores.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Stage {
    Ingest,
    Extract,
    Build,
    Embed,
    Index,
    Query,
    Eval,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Extract => "extract",
            Stage::Build => "build",
            Stage::Embed => "embed",
            Stage::Index => "index",
            Stage::Query => "query",
            Stage::Eval => "eval",
        }
    }

    /// All stages in dependency order.
    pub fn all() -> [Stage; 7] {
        [
            Stage::Ingest,
            Stage::Extract,
            Stage::Build,
            Stage::Embed,
            Stage::Index,
            Stage::Query,
            Stage::Eval,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum QueryMode {
    Rag,
    Baseline,
    #[default]
    Both,
}

/// Per-invocation arguments that are not part of the config file.
#[derive(Debug, Clone, Default)]
pub struct StageArgs {
    pub mode: QueryMode,
    pub query: Option<String>,
    pub cases: Option<PathBuf>,
    pub explain: bool,
    pub from_scores: Option<PathBuf>,
}

struct StageContext<'a> {
    cfg: &'a PipelineConfig,
    dir: PathBuf,
    manifest: Manifest,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
}

impl<'a> StageContext<'a> {
    fn open(cfg: &'a PipelineConfig) -> Result<Self, CliError> {
        std::fs::create_dir_all(&cfg.artifact_dir)
            .map_err(|e| CliError::Io(format!("cannot create artifact dir: {e}")))?;
        Ok(Self {
            cfg,
            dir: cfg.artifact_dir.clone(),
            manifest: Manifest::load(&cfg.artifact_dir)?,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        })
    }

    fn path(&self, file: &str) -> PathBuf {
        self.dir.join(file)
    }

    /// Gate on an artifact produced by an earlier stage, then record it as
    /// an input of the current one.
    fn require(&mut self, producer: Stage, file: &str) -> Result<PathBuf, CliError> {
        self.manifest
            .verify_prerequisite(&self.dir, producer.name(), file)?;
        let path = self.path(file);
        self.inputs.insert(file.to_owned(), hash_file(&path)?);
        Ok(path)
    }

    fn note_external_input(&mut self, path: &Path) -> Result<(), CliError> {
        self.inputs.insert(path.display().to_string(), hash_file(path)?);
        Ok(())
    }

    fn note_output(&mut self, file: &str) -> Result<(), CliError> {
        self.outputs.insert(file.to_owned(), hash_file(&self.path(file))?);
        Ok(())
    }

    fn finish(mut self, stage: Stage, started: Instant) -> Result<(), CliError> {
        let config_hash = config_fingerprint(self.cfg)?;
        self.manifest.record(StageEntry {
            stage: stage.name().to_owned(),
            config_hash,
            inputs: self.inputs,
            outputs: self.outputs,
            duration_s: started.elapsed().as_secs_f64(),
        });
        self.manifest.save(&self.dir)
    }
}

/// Hash of the settings that influence artifact content. The artifact
/// directory is location metadata, so relocated runs fingerprint the same.
fn config_fingerprint(cfg: &PipelineConfig) -> Result<String, CliError> {
    let mut normalized = cfg.clone();
    normalized.artifact_dir = PathBuf::new();
    let body = serde_json::to_string(&normalized)
        .map_err(|e| CliError::Config(format!("unserializable config: {e}")))?;
    Ok(hash_bytes(body.as_bytes()))
}

/// Run one stage; returns the machine-readable summary.
pub fn run_stage(
    stage: Stage,
    cfg: &PipelineConfig,
    args: &StageArgs,
) -> Result<serde_json::Value, CliError> {
    let started = Instant::now();
    let mut ctx = StageContext::open(cfg)?;
    let mut summary = match stage {
        Stage::Ingest => run_ingest(&mut ctx)?,
        Stage::Extract => run_extract(&mut ctx)?,
        Stage::Build => run_build(&mut ctx)?,
        Stage::Embed => run_embed(&mut ctx)?,
        Stage::Index => run_index(&mut ctx)?,
        Stage::Query => run_query(&mut ctx, args)?,
        Stage::Eval => run_eval(&mut ctx, args)?,
    };
    ctx.finish(stage, started)?;
    if let Some(map) = summary.as_object_mut() {
        map.insert("stage".into(), json!(stage.name()));
        map.insert("duration_s".into(), json!(started.elapsed().as_secs_f64()));
    }
    Ok(summary)
}

fn write_jsonl<T: serde::Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut out = BufWriter::new(
        File::create(path).map_err(|e| CliError::Io(format!("cannot create {}: {e}", path.display())))?,
    );
    for row in rows {
        serde_json::to_writer(&mut out, row)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        out.write_all(b"\n")
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    }
    out.flush().map_err(|e| CliError::Io(e.to_string()))?;
    Ok(())
}

fn run_ingest(ctx: &mut StageContext) -> Result<serde_json::Value, CliError> {
    let cfg = ctx.cfg;
    if !cfg.corpus_csv.exists() {
        return Err(CliError::Io(format!("corpus file {} not found", cfg.corpus_csv.display())));
    }
    ctx.note_external_input(&cfg.corpus_csv.clone())?;
    let dict = match &cfg.contractions_path {
        Some(path) => {
            ctx.note_external_input(&path.clone())?;
            ContractionDictionary::from_path(path)?
        }
        None => ContractionDictionary::builtin(),
    };
    let stream = corpus::load_corpus(&cfg.corpus_csv, &cfg.text_column, &cfg.date_column)?;
    let (tweets, stats) = corpus::ingest(stream, &dict)?;
    corpus::save_tweets(&tweets, &ctx.path(TWEETS_FILE))?;
    ctx.note_output(TWEETS_FILE)?;
    Ok(json!({
        "rows_read": stats.rows_read,
        "tweets": stats.tweets,
        "skipped_malformed": stats.skipped_malformed,
        "skipped_bad_date": stats.skipped_bad_date,
        "skipped_empty_text": stats.skipped_empty_text,
    }))
}

fn extract_with_rules(
    tweets: &[Tweet],
    lexicon: &RelationLexicon,
) -> Result<Vec<Triple>, CliError> {
    let mut triples = Vec::new();
    for tweet in tweets {
        for extraction in rule_extract(&tweet.text, lexicon) {
            triples.push(extraction.into_triple(tweet.id, tweet.ts)?);
        }
    }
    Ok(triples)
}

fn extract_with_remote(
    tweets: &[Tweet],
    client: &ExtractorClient,
    concurrency: usize,
) -> Result<Vec<Triple>, CliError> {
    let workers = concurrency.max(1).min(tweets.len().max(1));
    let chunk_size = tweets.len().div_ceil(workers);
    let mut chunk_results: Vec<Result<Vec<(u64, i64, Vec<Extraction>)>, CliError>> = Vec::new();
    std::thread::scope(|scope| {
        let handles: Vec<_> = tweets
            .chunks(chunk_size.max(1))
            .map(|chunk| {
                scope.spawn(move || {
                    let mut rows = Vec::with_capacity(chunk.len());
                    for tweet in chunk {
                        let extractions = remote_extract(&tweet.text, client)?;
                        rows.push((tweet.id, tweet.ts, extractions));
                    }
                    Ok(rows)
                })
            })
            .collect();
        for handle in handles {
            chunk_results.push(handle.join().expect("extractor worker panicked"));
        }
    });
    // chunks are contiguous, so concatenation restores tweet-id order
    let mut triples = Vec::new();
    for chunk in chunk_results {
        for (id, ts, extractions) in chunk? {
            for extraction in extractions {
                triples.push(extraction.into_triple(id, ts)?);
            }
        }
    }
    Ok(triples)
}

fn run_extract(ctx: &mut StageContext) -> Result<serde_json::Value, CliError> {
    let tweets_path = ctx.require(Stage::Ingest, TWEETS_FILE)?;
    let tweets = corpus::load_tweets(&tweets_path)?;
    let triples = match &ctx.cfg.extractor {
        ExtractorConfig::Rule { lexicon_path } => {
            let lexicon = match lexicon_path {
                Some(path) => {
                    ctx.note_external_input(&path.clone())?;
                    RelationLexicon::from_path(path)?
                }
                None => RelationLexicon::default_lexicon(),
            };
            extract_with_rules(&tweets, &lexicon)?
        }
        ExtractorConfig::Remote { endpoint, model, timeout_s, max_retries, concurrency } => {
            let client = ExtractorClient::new(endpoint, model, *timeout_s, *max_retries);
            extract_with_remote(&tweets, &client, *concurrency)?
        }
    };
    write_jsonl(&ctx.path(TRIPLES_FILE), &triples)?;
    ctx.note_output(TRIPLES_FILE)?;
    Ok(json!({
        "tweets": tweets.len(),
        "triples": triples.len(),
    }))
}

fn load_triples(path: &Path) -> Result<Vec<Triple>, CliError> {
    let data = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    let mut triples = Vec::new();
    for (i, line) in data.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let triple: Triple = serde_json::from_str(line)
            .map_err(|e| CliError::Data(format!("triples line {}: {e}", i + 1)))?;
        triples.push(triple);
    }
    Ok(triples)
}

fn run_build(ctx: &mut StageContext) -> Result<serde_json::Value, CliError> {
    let triples_path = ctx.require(Stage::Extract, TRIPLES_FILE)?;
    let triples = load_triples(&triples_path)?;
    let mut graph = TemporalGraph::new();
    let mut edges_created = 0usize;
    for triple in &triples {
        if graph.merge_triple(triple).edge_created {
            edges_created += 1;
        }
    }
    graph.save(&ctx.path(NODES_FILE), &ctx.path(EDGES_FILE))?;
    ctx.note_output(NODES_FILE)?;
    ctx.note_output(EDGES_FILE)?;
    debug_assert_eq!(edges_created, graph.edge_count());
    Ok(json!({
        "triples": triples.len(),
        "nodes": graph.node_count(),
        "edges": graph.edge_count(),
    }))
}

fn load_graph(ctx: &mut StageContext) -> Result<TemporalGraph, CliError> {
    let nodes = ctx.require(Stage::Build, NODES_FILE)?;
    let edges = ctx.require(Stage::Build, EDGES_FILE)?;
    Ok(TemporalGraph::load(&nodes, &edges)?)
}

fn run_embed(ctx: &mut StageContext) -> Result<serde_json::Value, CliError> {
    let graph = load_graph(ctx)?;
    let walk_cfg = ctx.cfg.walk_config();
    let train_cfg = ctx.cfg.train_config();
    let walks = n2v::sample_walks(&graph, &walk_cfg)?;
    let workers = ctx.cfg.train_workers();
    let outcome = if workers > 1 {
        n2v::train_skipgram_parallel(&walks, graph.node_count(), &train_cfg, workers)?
    } else {
        n2v::train_skipgram(&walks, graph.node_count(), &train_cfg)?
    };
    n2v::save_embeddings(&outcome.embeddings, graph.node_names(), &ctx.path(EMBEDDINGS_FILE))?;
    ctx.note_output(EMBEDDINGS_FILE)?;
    Ok(json!({
        "nodes": graph.node_count(),
        "walks": walks.len(),
        "dim": train_cfg.dim,
        "epochs": train_cfg.epochs,
        "workers": workers,
        "epoch_loss": outcome.epoch_loss,
    }))
}

fn run_index(ctx: &mut StageContext) -> Result<serde_json::Value, CliError> {
    let graph = load_graph(ctx)?;
    let index = TripleIndex::build(&graph, &ctx.cfg.encoder())?;
    index.save(&ctx.path(INDEX_FILE))?;
    ctx.note_output(INDEX_FILE)?;
    Ok(json!({
        "edges": graph.edge_count(),
        "entries": index.len(),
        "dim": index.dim(),
    }))
}

/// Queries to answer: either one ad-hoc string or a cases file.
fn resolve_queries(
    ctx: &mut StageContext,
    args: &StageArgs,
) -> Result<Vec<(String, String)>, CliError> {
    if let Some(query) = &args.query {
        return Ok(vec![("q0".to_owned(), query.clone())]);
    }
    let path = args
        .cases
        .clone()
        .or_else(|| ctx.cfg.cases_path.clone())
        .ok_or_else(|| {
            CliError::Usage("query needs --query TEXT or --cases FILE (or cases_path in config)".into())
        })?;
    ctx.note_external_input(&path)?;
    let cases = evalkit::load_cases(&path)?;
    if cases.is_empty() {
        return Err(CliError::Data(format!("cases file {} is empty", path.display())));
    }
    Ok(cases.into_iter().map(|c| (c.qid, c.query)).collect())
}

fn run_query(ctx: &mut StageContext, args: &StageArgs) -> Result<serde_json::Value, CliError> {
    let rag_on = matches!(args.mode, QueryMode::Rag | QueryMode::Both);
    let baseline_on = matches!(args.mode, QueryMode::Baseline | QueryMode::Both);

    let tweets_path = ctx.require(Stage::Ingest, TWEETS_FILE)?;
    let tweets = corpus::load_tweets(&tweets_path)?;

    // rag mode needs the graph, embeddings, and index
    let rag_assets = if rag_on {
        let graph = load_graph(ctx)?;
        let embeddings_path = ctx.require(Stage::Embed, EMBEDDINGS_FILE)?;
        let (embeddings, _names): (EmbeddingMatrix, Vec<String>) =
            n2v::load_embeddings(&embeddings_path)?;
        let index_path = ctx.require(Stage::Index, INDEX_FILE)?;
        let index = TripleIndex::load(&index_path, &graph)?;
        Some((graph, embeddings, index))
    } else {
        None
    };

    let queries = resolve_queries(ctx, args)?;
    let encoder = ctx.cfg.encoder();
    let generator = ctx.cfg.generator();
    let template = PromptTemplate::default();
    let retrieval = &ctx.cfg.retrieval;

    let mut answers: Vec<Answer> = Vec::new();
    let mut traces: Vec<RetrievalTrace> = Vec::new();

    for (qid, query) in &queries {
        if rag_on {
            let (graph, embeddings, index) = rag_assets.as_ref().expect("loaded above");
            let (bundle, trace) =
                retrieve_for_query(query, &encoder, index, graph, embeddings, &tweets, retrieval)?;
            if bundle.is_empty() {
                return Err(CliError::Data(format!(
                    "no context retrieved for query {qid}; nothing exceeded the similarity threshold"
                )));
            }
            let prompt = generate::build_prompt(query, &bundle, &template)?;
            answers.push(generate::generate(&prompt, &generator, qid, Mode::Rag)?);
            if args.explain {
                traces.push(trace);
            }
        }
        if baseline_on {
            let bundle = generate::baseline_context(&tweets, ctx.cfg.char_budget)?;
            let prompt = generate::build_prompt(query, &bundle, &template)?;
            answers.push(generate::generate(&prompt, &generator, qid, Mode::Baseline)?);
        }
    }

    write_jsonl(&ctx.path(ANSWERS_FILE), &answers)?;
    ctx.note_output(ANSWERS_FILE)?;
    if args.explain {
        write_jsonl(&ctx.path(EXPLAIN_FILE), &traces)?;
        ctx.note_output(EXPLAIN_FILE)?;
    }
    Ok(json!({
        "queries": queries.len(),
        "answers": answers.len(),
        "rag": rag_on,
        "baseline": baseline_on,
    }))
}

fn load_answers(path: &Path) -> Result<Vec<Answer>, CliError> {
    let data = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    let mut answers = Vec::new();
    for (i, line) in data.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        answers.push(
            serde_json::from_str(line)
                .map_err(|e| CliError::Data(format!("answers line {}: {e}", i + 1)))?,
        );
    }
    Ok(answers)
}

fn run_eval(ctx: &mut StageContext, args: &StageArgs) -> Result<serde_json::Value, CliError> {
    let report = if let Some(scores_path) = &args.from_scores {
        ctx.note_external_input(scores_path)?;
        let per_case = evalkit::read_scores_csv(scores_path)?;
        if per_case.is_empty() {
            return Err(CliError::Data(format!("no scores in {}", scores_path.display())));
        }
        evalkit::aggregate(per_case)
    } else {
        let cases_path = args
            .cases
            .clone()
            .or_else(|| ctx.cfg.cases_path.clone())
            .ok_or_else(|| {
                CliError::Usage("eval needs --cases FILE (or cases_path in config), or --from-scores".into())
            })?;
        ctx.note_external_input(&cases_path)?;
        let cases: Vec<EvalCase> = evalkit::load_cases(&cases_path)?;
        let answers_path = ctx.require(Stage::Query, ANSWERS_FILE)?;
        let answers = load_answers(&answers_path)?;
        let rag: Vec<Answer> = answers.iter().filter(|a| a.mode == Mode::Rag).cloned().collect();
        let baseline: Vec<Answer> =
            answers.iter().filter(|a| a.mode == Mode::Baseline).cloned().collect();
        evalkit::compare_runs(&cases, &rag, &baseline, &ctx.cfg.encoder())?
    };

    let report_json = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::Io(format!("cannot serialize report: {e}")))?;
    std::fs::write(ctx.path(REPORT_FILE), report_json)
        .map_err(|e| CliError::Io(format!("cannot write report: {e}")))?;
    evalkit::write_scores_csv(&report, &ctx.path(SCORES_FILE))?;
    ctx.note_output(REPORT_FILE)?;
    ctx.note_output(SCORES_FILE)?;
    Ok(json!({
        "cases": report.cases,
        "average_improvement_pct": report.average_improvement_pct,
        "bleu_improvement_pct": report.bleu.relative_improvement_pct,
        "jaccard_improvement_pct": report.jaccard.relative_improvement_pct,
        "cosine_improvement_pct": report.cosine.relative_improvement_pct,
    }))
}
