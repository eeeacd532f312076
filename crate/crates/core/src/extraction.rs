//! Subject–relation–object extraction from cleaned sentences.
//!
//! Two interchangeable extractors: a deterministic lexicon matcher for
//! offline runs and tests, and a chat-completions client for a hosted model.

use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::{self, RemoteError};

#[derive(Debug, Error)]
pub enum ExtractionError {
    #[error("triple field {0:?} is empty after normalization")]
    EmptyField(&'static str),
    #[error("relation lexicon is empty")]
    EmptyLexicon,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Remote(#[from] RemoteError),
}

/// Lowercase, trim, and collapse inner whitespace.
pub fn normalize_term(s: &str) -> String {
    s.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// A (subject, relation, object) assertion with provenance back to the
/// tweet it was extracted from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triple {
    #[serde(rename = "s")]
    pub subject: String,
    #[serde(rename = "r")]
    pub relation: String,
    #[serde(rename = "o")]
    pub object: String,
    #[serde(rename = "src")]
    pub source: u64,
    #[serde(rename = "ts")]
    pub timestamp: i64,
}

impl Triple {
    /// Normalizes all three text fields and rejects empties.
    pub fn new(
        subject: &str,
        relation: &str,
        object: &str,
        source: u64,
        timestamp: i64,
    ) -> Result<Self, ExtractionError> {
        let subject = normalize_term(subject);
        let relation = normalize_term(relation);
        let object = normalize_term(object);
        if subject.is_empty() {
            return Err(ExtractionError::EmptyField("subject"));
        }
        if relation.is_empty() {
            return Err(ExtractionError::EmptyField("relation"));
        }
        if object.is_empty() {
            return Err(ExtractionError::EmptyField("object"));
        }
        Ok(Self { subject, relation, object, source, timestamp })
    }
}

/// An extracted (subject, relation, object) before provenance is attached.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extraction {
    pub subject: String,
    pub relation: String,
    pub object: String,
}

impl Extraction {
    pub fn into_triple(self, source: u64, timestamp: i64) -> Result<Triple, ExtractionError> {
        Triple::new(&self.subject, &self.relation, &self.object, source, timestamp)
    }
}

/// Ordered list of relation phrases for the deterministic extractor.
#[derive(Debug, Clone)]
pub struct RelationLexicon {
    // each phrase kept as its token sequence
    phrases: Vec<Vec<String>>,
}

pub const DEFAULT_RELATION_PHRASES: &[&str] = &[
    "resulted in",
    "led to",
    "leads to",
    "due to",
    "caused",
    "causes",
    "increased",
    "restricted",
];

/// Phrase that inverts subject and object: `X due to Y` asserts that Y is
/// the cause, so it becomes `(Y, caused, X)`.
const INVERTING_PHRASE: &str = "due to";

impl RelationLexicon {
    pub fn new<I, S>(phrases: I) -> Result<Self, ExtractionError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut toks: Vec<Vec<String>> = phrases
            .into_iter()
            .map(|p| {
                normalize_term(p.as_ref())
                    .split_whitespace()
                    .map(str::to_owned)
                    .collect::<Vec<_>>()
            })
            .filter(|t| !t.is_empty())
            .collect();
        if toks.is_empty() {
            return Err(ExtractionError::EmptyLexicon);
        }
        // longer phrases must come before their prefixes
        toks.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        toks.dedup();
        Ok(Self { phrases: toks })
    }

    pub fn default_lexicon() -> Self {
        Self::new(DEFAULT_RELATION_PHRASES.iter().copied()).unwrap()
    }

    /// One phrase per non-empty line; `#`-prefixed lines are comments.
    pub fn from_path(path: &Path) -> Result<Self, ExtractionError> {
        let content = std::fs::read_to_string(path)?;
        Self::new(
            content
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }

    /// Longest phrase matching `tokens` at position `at`, if any.
    fn longest_match(&self, tokens: &[&str], at: usize) -> Option<&[String]> {
        self.phrases
            .iter()
            .find(|phrase| {
                tokens.len() - at >= phrase.len()
                    && phrase.iter().zip(&tokens[at..]).all(|(p, t)| p == t)
            })
            .map(Vec::as_slice)
    }
}

/// Hard cap on triples per sentence; run-on text stops producing output
/// after this many.
pub const MAX_TRIPLES_PER_SENTENCE: usize = 4;

/// Deterministic lexicon extraction over a cleaned sentence.
///
/// Non-overlapping, leftmost-longest phrase occurrences split the sentence
/// into segments; each occurrence with non-empty text on both sides yields
/// one triple. Segment text between two occurrences serves as the object of
/// the first and the subject of the second.
pub fn rule_extract(sentence: &str, lexicon: &RelationLexicon) -> Vec<Extraction> {
    let tokens: Vec<&str> = sentence.split_whitespace().collect();

    let mut matches: Vec<(usize, usize)> = Vec::new(); // (start, end) token spans
    let mut i = 0;
    while i < tokens.len() {
        match lexicon.longest_match(&tokens, i) {
            Some(phrase) => {
                matches.push((i, i + phrase.len()));
                i += phrase.len();
            }
            None => i += 1,
        }
    }

    let mut out = Vec::new();
    let mut prev_end = 0;
    for (k, &(start, end)) in matches.iter().enumerate() {
        if out.len() == MAX_TRIPLES_PER_SENTENCE {
            break;
        }
        let right_end = matches.get(k + 1).map_or(tokens.len(), |&(s, _)| s);
        let left = tokens[prev_end..start].join(" ");
        let right = tokens[end..right_end].join(" ");
        if !left.is_empty() && !right.is_empty() {
            let relation = tokens[start..end].join(" ");
            let (subject, relation, object) = if relation == INVERTING_PHRASE {
                (right.clone(), "caused".to_owned(), left)
            } else {
                (left, relation, right.clone())
            };
            out.push(Extraction { subject, relation, object });
        }
        prev_end = end;
    }
    out
}

/// Client for a hosted relation-extraction model speaking the
/// chat-completions protocol.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtractorClient {
    pub endpoint: String,
    pub model: String,
    pub timeout_s: f64,
    pub max_retries: u32,
}

impl ExtractorClient {
    pub fn new(endpoint: &str, model: &str, timeout_s: f64, max_retries: u32) -> Self {
        assert!(timeout_s > 0.0, "timeout must be positive");
        Self {
            endpoint: endpoint.to_owned(),
            model: model.to_owned(),
            timeout_s,
            max_retries,
        }
    }
}

const EXTRACT_SYSTEM_PROMPT: &str = "Extract subject-relation-object triples from the \
sentence. Respond with only a JSON array of objects with keys \"s\", \"r\", \"o\". \
Respond with [] if no relation is present.";

#[derive(Deserialize)]
struct RawSpo {
    #[serde(default)]
    s: String,
    #[serde(default)]
    r: String,
    #[serde(default)]
    o: String,
}

/// Ask the remote model for triples in the `[{"s","r","o"}]` contract.
/// Malformed entries are dropped with a warning; empty fields never escape.
pub fn remote_extract(
    sentence: &str,
    client: &ExtractorClient,
) -> Result<Vec<Extraction>, ExtractionError> {
    let content = llm::chat_completion(
        &client.endpoint,
        &client.model,
        EXTRACT_SYSTEM_PROMPT,
        sentence,
        0.0,
        Duration::from_secs_f64(client.timeout_s),
        client.max_retries,
    )?;
    let raw: Vec<RawSpo> = serde_json::from_str(content.trim())
        .map_err(|e| RemoteError::Unparseable(format!("triple payload: {e}")))?;
    let mut dropped = 0usize;
    let mut out = Vec::with_capacity(raw.len());
    for spo in raw {
        let subject = normalize_term(&spo.s);
        let relation = normalize_term(&spo.r);
        let object = normalize_term(&spo.o);
        if subject.is_empty() || relation.is_empty() || object.is_empty() {
            dropped += 1;
            continue;
        }
        out.push(Extraction { subject, relation, object });
    }
    if dropped > 0 {
        log::warn!("remote extractor returned {dropped} malformed triple(s); dropped");
    }
    Ok(out)
}
