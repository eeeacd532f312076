//! Prompt construction and answer generation.
//!
//! Generation is pluggable: a chat-completions client for hosted models,
//! plus two mocks that keep the pipeline fully offline — `MockEcho` returns
//! the prompt's context section, `MockFixed` returns a canned string.

use std::time::{Duration, Instant};

use chrono::DateTime;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Tweet;
use crate::llm::{self, RemoteError};
use crate::retrieve::{ContextBundle, ContextSentence};

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error("context bundle is empty")]
    NoContext,
    #[error("prompt is empty")]
    EmptyPrompt,
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("char budget too small for even the first tweet")]
    EmptyBudget,
    #[error("template must contain {{{0}}} exactly once")]
    BadTemplate(&'static str),
    #[error(transparent)]
    Remote(#[from] RemoteError),
}

/// Prompt layout with `{query}` and `{context}` slots.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PromptTemplate {
    system: String,
    user_layout: String,
}

pub const CONTEXT_HEADER: &str = "Context:";

impl PromptTemplate {
    pub fn new(system: &str, user_layout: &str) -> Result<Self, GenerateError> {
        for slot in ["{query}", "{context}"] {
            if user_layout.matches(slot).count() != 1 {
                let name = if slot == "{query}" { "query" } else { "context" };
                return Err(GenerateError::BadTemplate(name));
            }
        }
        Ok(Self { system: system.to_owned(), user_layout: user_layout.to_owned() })
    }

    pub fn system(&self) -> &str {
        &self.system
    }
}

impl Default for PromptTemplate {
    fn default() -> Self {
        Self::new(
            "You answer causal questions strictly from the provided context. \
             State the cause(s) concisely and only use facts from the context.",
            &format!(
                "{CONTEXT_HEADER}\n{{context}}\n\n\
                 Based only on the context above, explain what caused: {{query}}"
            ),
        )
        .expect("default template has both slots")
    }
}

fn format_ts(ts: i64) -> String {
    DateTime::from_timestamp(ts, 0)
        .map(|dt| dt.format("%Y-%m-%d %H:%M:%S").to_string())
        .unwrap_or_else(|| ts.to_string())
}

/// Render the prompt. Context sentences appear one per line, prefixed with
/// their UTC timestamp when the bundle is chronologically ordered.
pub fn build_prompt(
    query: &str,
    ctx: &ContextBundle,
    template: &PromptTemplate,
) -> Result<String, GenerateError> {
    if ctx.is_empty() {
        return Err(GenerateError::NoContext);
    }
    let lines: Vec<String> = ctx
        .sentences
        .iter()
        .map(|s| {
            if ctx.temporal_order {
                format!("[{}] {}", format_ts(s.ts), s.text)
            } else {
                s.text.clone()
            }
        })
        .collect();
    let user = template
        .user_layout
        .replace("{context}", &lines.join("\n"))
        .replace("{query}", query);
    Ok(format!("{}\n\n{}", template.system, user))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Rag,
    Baseline,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::Rag => write!(f, "rag"),
            Mode::Baseline => write!(f, "baseline"),
        }
    }
}

/// A generated answer for one query in one mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    pub qid: String,
    pub mode: Mode,
    pub text: String,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GeneratorClient {
    Remote {
        endpoint: String,
        model: String,
        timeout_s: f64,
        #[serde(default)]
        temperature: f64,
        #[serde(default)]
        max_retries: u32,
    },
    /// Returns the prompt's context section verbatim (space-joined lines,
    /// timestamps stripped). Makes end-to-end runs deterministic.
    MockEcho,
    MockFixed { text: String },
}

/// Lines of the context block: everything between the `Context:` header and
/// the next blank line, with any leading `[...] ` timestamp prefix removed.
fn context_lines(prompt: &str) -> Vec<String> {
    let mut lines = Vec::new();
    let mut in_context = false;
    for line in prompt.lines() {
        if line.trim() == CONTEXT_HEADER {
            in_context = true;
            continue;
        }
        if in_context {
            if line.trim().is_empty() {
                break;
            }
            let stripped = if line.starts_with('[') {
                line.split_once("] ").map_or(line, |(_, rest)| rest)
            } else {
                line
            };
            lines.push(stripped.to_owned());
        }
    }
    lines
}

/// Produce an answer for `prompt`. Remote mode makes one chat-completion
/// call at the configured temperature; the mocks never touch the network
/// and report zero elapsed time.
pub fn generate(
    prompt: &str,
    client: &GeneratorClient,
    qid: &str,
    mode: Mode,
) -> Result<Answer, GenerateError> {
    if prompt.trim().is_empty() {
        return Err(GenerateError::EmptyPrompt);
    }
    match client {
        GeneratorClient::Remote { endpoint, model, timeout_s, temperature, max_retries } => {
            let started = Instant::now();
            let text = llm::chat_completion(
                endpoint,
                model,
                "You are a careful analyst.",
                prompt,
                *temperature,
                Duration::from_secs_f64(*timeout_s),
                *max_retries,
            )?;
            Ok(Answer {
                qid: qid.to_owned(),
                mode,
                text,
                elapsed_s: started.elapsed().as_secs_f64(),
            })
        }
        GeneratorClient::MockEcho => Ok(Answer {
            qid: qid.to_owned(),
            mode,
            text: context_lines(prompt).join(" "),
            elapsed_s: 0.0,
        }),
        GeneratorClient::MockFixed { text } => Ok(Answer {
            qid: qid.to_owned(),
            mode,
            text: text.clone(),
            elapsed_s: 0.0,
        }),
    }
}

/// Whole-corpus grounding for the no-retrieval baseline: tweets in
/// chronological order, concatenated until `char_budget` is reached. The
/// cap drops the latest tweets, never splits one.
pub fn baseline_context(corpus: &[Tweet], char_budget: usize) -> Result<ContextBundle, GenerateError> {
    if corpus.is_empty() {
        return Err(GenerateError::EmptyCorpus);
    }
    let mut ordered: Vec<&Tweet> = corpus.iter().collect();
    ordered.sort_by_key(|t| (t.ts, t.id));

    let mut sentences = Vec::new();
    let mut used = 0usize;
    for tweet in &ordered {
        let len = tweet.text.chars().count();
        if used + len > char_budget {
            break;
        }
        used += len;
        sentences.push(ContextSentence { ts: tweet.ts, id: tweet.id, text: tweet.text.clone() });
    }
    if sentences.is_empty() {
        return Err(GenerateError::EmptyBudget);
    }
    let dropped = ordered.len() - sentences.len();
    if dropped > 0 {
        log::warn!("baseline context truncated: {dropped} tweet(s) over the {char_budget}-char budget");
    }
    Ok(ContextBundle {
        sentences,
        seed_edges: Vec::new(),
        expanded_nodes: Vec::new(),
        temporal_order: true,
    })
}
