//! Context retrieval: rank encoded edges against the query, expand the
//! seed nodes through embedding-space neighbors, and assemble the source
//! sentences in chronological order.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Tweet;
use crate::encode::{cosine_sim, EdgeKey, Encoder, TripleIndex, Vector};
use crate::kgstore::{NodeId, TemporalGraph};
use crate::n2v::{cosine_rows, EmbeddingMatrix};
use crate::Real;

#[derive(Debug, Error)]
pub enum RetrieveError {
    #[error("triple index is empty")]
    EmptyIndex,
    #[error("query dimension {0} does not match index dimension {1}")]
    DimensionMismatch(usize, usize),
    #[error(transparent)]
    Encode(#[from] crate::encode::EncodeError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrievalConfig {
    pub k_contextual: usize,
    pub sim_threshold: f64,
    pub max_context_sentences: usize,
    pub temporal_order: bool,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            k_contextual: 25,
            sim_threshold: 0.35,
            max_context_sentences: 5,
            temporal_order: true,
        }
    }
}

/// One sentence selected as grounding context.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextSentence {
    pub ts: i64,
    pub id: u64,
    pub text: String,
}

/// The grounding handed to the generator: selected sentences plus the
/// retrieval provenance that produced them.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ContextBundle {
    pub sentences: Vec<ContextSentence>,
    pub seed_edges: Vec<EdgeKey>,
    pub expanded_nodes: Vec<String>,
    pub temporal_order: bool,
}

impl ContextBundle {
    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }
}

/// All index entries with cosine at or above the threshold, best first
/// (ties broken by edge key), truncated to `k_contextual`.
pub fn rank_candidates(
    query: &Vector<Real>,
    index: &TripleIndex,
    cfg: &RetrievalConfig,
) -> Result<Vec<(EdgeKey, Real)>, RetrieveError> {
    if index.is_empty() {
        return Err(RetrieveError::EmptyIndex);
    }
    if query.dim() != index.dim() {
        return Err(RetrieveError::DimensionMismatch(query.dim(), index.dim()));
    }
    let mut scored: Vec<(EdgeKey, Real)> = Vec::new();
    for entry in index.entries() {
        let sim = cosine_sim(query, &entry.vec)?;
        if sim >= cfg.sim_threshold {
            scored.push((entry.key.clone(), sim));
        }
    }
    scored.sort_by(|(ka, sa), (kb, sb)| {
        sb.partial_cmp(sa).expect("similarities are finite").then_with(|| ka.cmp(kb))
    });
    scored.truncate(cfg.k_contextual);
    Ok(scored)
}

/// Seeds plus every node whose embedding reaches the similarity threshold
/// against any seed.
pub fn expand_neighbors(
    seeds: &BTreeSet<NodeId>,
    embeddings: &EmbeddingMatrix<Real>,
    cfg: &RetrievalConfig,
) -> BTreeSet<NodeId> {
    let mut out = seeds.clone();
    if seeds.is_empty() {
        return out;
    }
    for idx in 0..embeddings.node_count() {
        let candidate = NodeId(idx as u32);
        if out.contains(&candidate) {
            continue;
        }
        let reaches = seeds.iter().any(|&seed| {
            cosine_rows(embeddings, candidate, seed)
                .is_some_and(|sim| sim >= cfg.sim_threshold)
        });
        if reaches {
            out.insert(candidate);
        }
    }
    out
}

/// Collect provenance sentences for the node-induced subgraph, rank them by
/// (seed-edge hits, earliest timestamp, tweet id), keep the best
/// `max_context_sentences`, and order the final bundle chronologically when
/// configured.
pub fn assemble_context(
    graph: &TemporalGraph,
    nodes: &BTreeSet<NodeId>,
    seed_edges: &[EdgeKey],
    corpus: &[Tweet],
    cfg: &RetrievalConfig,
) -> ContextBundle {
    let provenance = graph.provenance_sentences(nodes, corpus);

    // tweets sourcing a seed edge outrank expansion-only provenance
    let seed_hits = |tweet: u64| -> usize {
        seed_edges
            .iter()
            .filter(|key| {
                let (Some(src), Some(dst)) = (graph.node_id(&key.src), graph.node_id(&key.dst))
                else {
                    return false;
                };
                graph.edges().iter().any(|e| {
                    e.src == src
                        && e.dst == dst
                        && e.rel == key.rel
                        && e.occurrences.iter().any(|o| o.tweet == tweet)
                })
            })
            .count()
    };

    let mut ranked: Vec<(usize, i64, u64, String)> = provenance
        .into_iter()
        .map(|(ts, id, text)| (seed_hits(id), ts, id, text))
        .collect();
    ranked.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| (a.1, a.2).cmp(&(b.1, b.2))));
    ranked.truncate(cfg.max_context_sentences);

    let mut sentences: Vec<ContextSentence> = ranked
        .into_iter()
        .map(|(_, ts, id, text)| ContextSentence { ts, id, text })
        .collect();
    if cfg.temporal_order {
        sentences.sort_by_key(|s| (s.ts, s.id));
    }

    ContextBundle {
        sentences,
        seed_edges: seed_edges.to_vec(),
        expanded_nodes: nodes
            .iter()
            .map(|&n| graph.node_name(n).expect("nodes are in graph").to_owned())
            .collect(),
        temporal_order: cfg.temporal_order,
    }
}

/// JSON trace for `--explain`: the evidence behind one retrieval.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RetrievalTrace {
    pub query: String,
    pub seeds: Vec<TraceSeed>,
    pub expanded: Vec<String>,
    pub sentences: Vec<ContextSentence>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceSeed {
    pub edge: EdgeKey,
    pub sim: f64,
}

/// Full retrieval for one query string: encode, rank, expand, assemble.
pub fn retrieve_for_query(
    query: &str,
    encoder: &Encoder,
    index: &TripleIndex,
    graph: &TemporalGraph,
    embeddings: &EmbeddingMatrix<Real>,
    corpus: &[Tweet],
    cfg: &RetrievalConfig,
) -> Result<(ContextBundle, RetrievalTrace), RetrieveError> {
    let query_vec = crate::encode::encode_text(query, encoder)?;
    let seeds = rank_candidates(&query_vec, index, cfg)?;

    let mut seed_nodes: BTreeSet<NodeId> = BTreeSet::new();
    for entry in index.entries() {
        if seeds.iter().any(|(key, _)| key == &entry.key) {
            seed_nodes.insert(entry.src);
            seed_nodes.insert(entry.dst);
        }
    }
    let expanded = expand_neighbors(&seed_nodes, embeddings, cfg);
    let seed_keys: Vec<EdgeKey> = seeds.iter().map(|(k, _)| k.clone()).collect();
    let bundle = assemble_context(graph, &expanded, &seed_keys, corpus, cfg);
    let trace = RetrievalTrace {
        query: query.to_owned(),
        seeds: seeds
            .into_iter()
            .map(|(edge, sim)| TraceSeed { edge, sim })
            .collect(),
        expanded: bundle.expanded_nodes.clone(),
        sentences: bundle.sentences.clone(),
    };
    Ok((bundle, trace))
}
