//! Pipeline configuration: a JSON file with defaults for everything except
//! the corpus path, plus dotted-path `--set key=value` overrides.

use std::path::{Path, PathBuf};

use causegraph::encode::Encoder;
use causegraph::generate::GeneratorClient;
use causegraph::n2v::{splitmix_seed, TrainConfig, WalkConfig};
use causegraph::retrieve::RetrievalConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Which extractor turns sentences into triples.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ExtractorConfig {
    /// Deterministic lexicon matcher; `lexicon_path` overrides the built-in
    /// relation phrases.
    Rule {
        #[serde(default)]
        lexicon_path: Option<PathBuf>,
    },
    Remote {
        endpoint: String,
        model: String,
        #[serde(default = "default_timeout")]
        timeout_s: f64,
        #[serde(default = "default_retries")]
        max_retries: u32,
        #[serde(default = "default_concurrency")]
        concurrency: usize,
    },
}

fn default_timeout() -> f64 {
    30.0
}

fn default_retries() -> u32 {
    2
}

fn default_concurrency() -> usize {
    4
}

/// Encoder selection; seeds and dimensions for the local encoder derive
/// from the global seed unless set explicitly.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EncoderConfig {
    Local {
        #[serde(default = "default_encoder_dim")]
        dim: usize,
        #[serde(default)]
        seed: Option<u64>,
    },
    Remote {
        endpoint: String,
        model: String,
        #[serde(default = "default_timeout")]
        timeout_s: f64,
        #[serde(default = "default_retries")]
        max_retries: u32,
    },
}

fn default_encoder_dim() -> usize {
    256
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GeneratorConfig {
    Remote {
        endpoint: String,
        model: String,
        #[serde(default = "default_timeout")]
        timeout_s: f64,
        #[serde(default)]
        temperature: f64,
        #[serde(default = "default_retries")]
        max_retries: u32,
    },
    MockEcho,
    MockFixed { text: String },
}

/// Per-run seeds and knobs; every field except `corpus_csv` has a default.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub corpus_csv: PathBuf,
    #[serde(default = "default_artifact_dir")]
    pub artifact_dir: PathBuf,
    #[serde(default = "default_text_column")]
    pub text_column: String,
    #[serde(default = "default_date_column")]
    pub date_column: String,
    /// Replaces the built-in contraction dictionary when set.
    #[serde(default)]
    pub contractions_path: Option<PathBuf>,
    #[serde(default = "default_extractor")]
    pub extractor: ExtractorConfig,
    #[serde(default = "default_encoder")]
    pub encoder: EncoderConfig,
    #[serde(default = "default_generator")]
    pub generator: GeneratorConfig,
    #[serde(default)]
    pub walk: WalkSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub retrieval: RetrievalConfig,
    /// Character budget for the whole-corpus baseline context.
    #[serde(default = "default_char_budget")]
    pub char_budget: usize,
    /// Default cases file for `query`/`eval` when none is passed.
    #[serde(default)]
    pub cases_path: Option<PathBuf>,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_artifact_dir() -> PathBuf {
    PathBuf::from("artifacts")
}

fn default_text_column() -> String {
    "text".to_owned()
}

fn default_date_column() -> String {
    "date".to_owned()
}

fn default_extractor() -> ExtractorConfig {
    ExtractorConfig::Rule { lexicon_path: None }
}

fn default_encoder() -> EncoderConfig {
    EncoderConfig::Local { dim: default_encoder_dim(), seed: None }
}

fn default_generator() -> GeneratorConfig {
    GeneratorConfig::MockEcho
}

fn default_char_budget() -> usize {
    100_000
}

fn default_seed() -> u64 {
    42
}

/// Walk parameters with the seed optional (derived from the global seed).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct WalkSection {
    pub walks_per_node: Option<usize>,
    pub walk_length: Option<usize>,
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub temporal: Option<bool>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSection {
    pub dim: Option<usize>,
    pub window: Option<usize>,
    pub negatives: Option<usize>,
    pub epochs: Option<usize>,
    pub initial_lr: Option<f64>,
    pub seed: Option<u64>,
    /// More than one worker trades bit-determinism for speed.
    pub workers: Option<usize>,
}

const WALK_SEED_TAG: u64 = 1;
const TRAIN_SEED_TAG: u64 = 2;
const ENCODER_SEED_TAG: u64 = 3;

impl PipelineConfig {
    pub fn walk_config(&self) -> WalkConfig {
        let d = WalkConfig::default();
        WalkConfig {
            walks_per_node: self.walk.walks_per_node.unwrap_or(d.walks_per_node),
            walk_length: self.walk.walk_length.unwrap_or(d.walk_length),
            p: self.walk.p.unwrap_or(d.p),
            q: self.walk.q.unwrap_or(d.q),
            temporal: self.walk.temporal.unwrap_or(d.temporal),
            seed: self.walk.seed.unwrap_or_else(|| splitmix_seed(self.seed ^ WALK_SEED_TAG)),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let d = TrainConfig::default();
        TrainConfig {
            dim: self.train.dim.unwrap_or(d.dim),
            window: self.train.window.unwrap_or(d.window),
            negatives: self.train.negatives.unwrap_or(d.negatives),
            epochs: self.train.epochs.unwrap_or(d.epochs),
            initial_lr: self.train.initial_lr.unwrap_or(d.initial_lr),
            seed: self.train.seed.unwrap_or_else(|| splitmix_seed(self.seed ^ TRAIN_SEED_TAG)),
        }
    }

    pub fn train_workers(&self) -> usize {
        self.train.workers.unwrap_or(1).max(1)
    }

    pub fn encoder(&self) -> Encoder {
        match &self.encoder {
            EncoderConfig::Local { dim, seed } => Encoder::Local {
                dim: *dim,
                seed: seed.unwrap_or_else(|| splitmix_seed(self.seed ^ ENCODER_SEED_TAG)),
            },
            EncoderConfig::Remote { endpoint, model, timeout_s, max_retries } => {
                Encoder::Remote {
                    endpoint: endpoint.clone(),
                    model: model.clone(),
                    timeout_s: *timeout_s,
                    max_retries: *max_retries,
                }
            }
        }
    }

    pub fn generator(&self) -> GeneratorClient {
        match &self.generator {
            GeneratorConfig::Remote { endpoint, model, timeout_s, temperature, max_retries } => {
                GeneratorClient::Remote {
                    endpoint: endpoint.clone(),
                    model: model.clone(),
                    timeout_s: *timeout_s,
                    temperature: *temperature,
                    max_retries: *max_retries,
                }
            }
            GeneratorConfig::MockEcho => GeneratorClient::MockEcho,
            GeneratorConfig::MockFixed { text } => GeneratorClient::MockFixed { text: text.clone() },
        }
    }

    /// Force the hermetic path: local encoder and echo generator, rule
    /// extractor. Used by `--mock-llm`.
    pub fn force_mock_llm(&mut self) {
        if matches!(self.encoder, EncoderConfig::Remote { .. }) {
            self.encoder = EncoderConfig::Local { dim: default_encoder_dim(), seed: None };
        }
        self.generator = GeneratorConfig::MockEcho;
        self.extractor = match std::mem::replace(&mut self.extractor, default_extractor()) {
            rule @ ExtractorConfig::Rule { .. } => rule,
            ExtractorConfig::Remote { .. } => default_extractor(),
        };
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let invalid = |field: &str| CliError::Config(format!("invalid config field: {field}"));
        self.walk_config().validate().map_err(|_| invalid("walk"))?;
        self.train_config().validate().map_err(|_| invalid("train"))?;
        if self.retrieval.k_contextual < 1 {
            return Err(invalid("retrieval.k_contextual"));
        }
        if !(0.0..=1.0).contains(&self.retrieval.sim_threshold) {
            return Err(invalid("retrieval.sim_threshold"));
        }
        if self.retrieval.max_context_sentences < 1 {
            return Err(invalid("retrieval.max_context_sentences"));
        }
        match &self.encoder {
            EncoderConfig::Local { dim, .. } if *dim < 8 => return Err(invalid("encoder.dim")),
            EncoderConfig::Remote { timeout_s, .. } if *timeout_s <= 0.0 => {
                return Err(invalid("encoder.timeout_s"))
            }
            _ => {}
        }
        if let ExtractorConfig::Remote { timeout_s, .. } = &self.extractor {
            if *timeout_s <= 0.0 {
                return Err(invalid("extractor.timeout_s"));
            }
        }
        if let GeneratorConfig::Remote { timeout_s, .. } = &self.generator {
            if *timeout_s <= 0.0 {
                return Err(invalid("generator.timeout_s"));
            }
        }
        if self.char_budget == 0 {
            return Err(invalid("char_budget"));
        }
        Ok(())
    }
}

/// Load the config file and apply `--set key=value` overrides (dotted
/// paths into the JSON document, values parsed as JSON scalars when they
/// look like one).
pub fn load_config(path: &Path, sets: &[String]) -> Result<PipelineConfig, CliError> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
    let mut doc: serde_json::Value = serde_json::from_str(&raw)
        .map_err(|e| CliError::Config(format!("config is not valid JSON: {e}")))?;
    for set in sets {
        apply_set(&mut doc, set)?;
    }
    let cfg: PipelineConfig = serde_json::from_value(doc)
        .map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

fn apply_set(doc: &mut serde_json::Value, spec: &str) -> Result<(), CliError> {
    let (path, value) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("--set expects key=value, got {spec:?}")))?;
    let parsed: serde_json::Value = serde_json::from_str(value)
        .unwrap_or_else(|_| serde_json::Value::String(value.to_owned()));
    let mut cursor = doc;
    let segments: Vec<&str> = path.split('.').collect();
    for (i, segment) in segments.iter().enumerate() {
        if !cursor.is_object() {
            return Err(CliError::Config(format!("--set path {path:?} crosses a non-object")));
        }
        let map = cursor.as_object_mut().expect("checked above");
        if i + 1 == segments.len() {
            map.insert((*segment).to_owned(), parsed);
            return Ok(());
        }
        cursor = map
            .entry((*segment).to_owned())
            .or_insert_with(|| serde_json::Value::Object(Default::default()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn config_file(json: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(json.as_bytes()).unwrap();
        f
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let f = config_file(r#"{"corpus_csv": "tweets.csv"}"#);
        let cfg = load_config(f.path(), &[]).unwrap();
        assert_eq!(cfg.text_column, "text");
        assert_eq!(cfg.retrieval.k_contextual, 25);
        assert_eq!(cfg.retrieval.sim_threshold, 0.35);
        assert_eq!(cfg.retrieval.max_context_sentences, 5);
        assert_eq!(cfg.walk_config().walks_per_node, 10);
        assert_eq!(cfg.train_config().dim, 128);
        assert_eq!(cfg.seed, 42);
        assert!(matches!(cfg.generator(), GeneratorClient::MockEcho));
    }

    #[test]
    fn set_overrides_nested_fields() {
        let f = config_file(r#"{"corpus_csv": "tweets.csv"}"#);
        let cfg = load_config(
            f.path(),
            &[
                "train.dim=32".into(),
                "retrieval.sim_threshold=0.5".into(),
                "walk.temporal=false".into(),
                "seed=7".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.train_config().dim, 32);
        assert_eq!(cfg.retrieval.sim_threshold, 0.5);
        assert!(!cfg.walk_config().temporal);
        assert_eq!(cfg.seed, 7);
    }

    #[test]
    fn invalid_fields_are_config_errors() {
        let f = config_file(r#"{"corpus_csv": "x.csv", "retrieval": {"k_contextual": 0}}"#);
        assert!(matches!(load_config(f.path(), &[]), Err(CliError::Config(_))));

        let f = config_file(r#"{"corpus_csv": "x.csv", "typo_field": 1}"#);
        assert!(matches!(load_config(f.path(), &[]), Err(CliError::Config(_))));

        let f = config_file(r#"{"corpus_csv": "x.csv"}"#);
        assert!(matches!(
            load_config(f.path(), &["train.dim=1".into()]),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn missing_corpus_path_is_a_config_error() {
        let f = config_file(r#"{}"#);
        assert!(matches!(load_config(f.path(), &[]), Err(CliError::Config(_))));
    }

    #[test]
    fn seeds_derive_from_global_seed() {
        let f = config_file(r#"{"corpus_csv": "x.csv", "seed": 1}"#);
        let a = load_config(f.path(), &[]).unwrap();
        let g = config_file(r#"{"corpus_csv": "x.csv", "seed": 2}"#);
        let b = load_config(g.path(), &[]).unwrap();
        assert_ne!(a.walk_config().seed, b.walk_config().seed);
        assert_ne!(a.walk_config().seed, a.train_config().seed);
    }

    #[test]
    fn mock_llm_forces_offline_components() {
        let f = config_file(
            r#"{"corpus_csv": "x.csv",
                "encoder": {"kind": "remote", "endpoint": "http://e", "model": "m"},
                "generator": {"kind": "remote", "endpoint": "http://g", "model": "m"},
                "extractor": {"kind": "remote", "endpoint": "http://x", "model": "m"}}"#,
        );
        let mut cfg = load_config(f.path(), &[]).unwrap();
        cfg.force_mock_llm();
        assert!(matches!(cfg.encoder(), Encoder::Local { .. }));
        assert!(matches!(cfg.generator(), GeneratorClient::MockEcho));
        assert!(matches!(cfg.extractor, ExtractorConfig::Rule { .. }));
    }
}
