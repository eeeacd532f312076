//! Text-to-vector encoding behind a pluggable contract.
//!
//! The local encoder hashes whitespace tokens into signed buckets and
//! unit-normalizes — fully deterministic and offline. The remote encoder
//! calls a hosted embeddings endpoint. All encoder output is unit-norm, so
//! downstream cosine reduces to a dot product.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kgstore::{NodeId, TemporalGraph};
use crate::llm::{self, RemoteError};
use crate::scalar::Scalar;
use crate::Real;

#[derive(Debug, Error)]
pub enum EncodeError {
    #[error("text is empty after trimming")]
    EmptyText,
    #[error("vector dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("zero vector has no direction")]
    ZeroVector,
    #[error("vector contains non-finite component")]
    NonFinite,
    #[error("local encoder dimension {0} is below the minimum of 8")]
    DimensionTooSmall(usize),
    #[error(transparent)]
    Remote(#[from] RemoteError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed index file: {0}")]
    BadJson(#[from] serde_json::Error),
    #[error("index refers to unknown graph node {0:?}")]
    UnknownIndexNode(String),
}

/// Dense real vector; encoder outputs are unit-normalized on emission.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector<S: Scalar = Real> {
    components: Vec<S>,
}

impl<S: Scalar> Vector<S> {
    pub fn new(components: Vec<S>) -> Result<Self, EncodeError> {
        if components.iter().any(|c| !c.is_finite()) {
            return Err(EncodeError::NonFinite);
        }
        Ok(Self { components })
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn as_slice(&self) -> &[S] {
        &self.components
    }

    pub fn norm(&self) -> S {
        self.components
            .iter()
            .map(|&c| c * c)
            .fold(S::zero(), |a, b| a + b)
            .sqrt()
    }

    /// Scale to unit norm; fails on the zero vector.
    pub fn normalized(mut self) -> Result<Self, EncodeError> {
        let norm = self.norm();
        if norm.is_zero() {
            return Err(EncodeError::ZeroVector);
        }
        for c in &mut self.components {
            *c = *c / norm;
        }
        Ok(self)
    }
}

pub fn cosine_sim<S: Scalar>(a: &Vector<S>, b: &Vector<S>) -> Result<S, EncodeError> {
    if a.dim() != b.dim() {
        return Err(EncodeError::DimensionMismatch(a.dim(), b.dim()));
    }
    let (na, nb) = (a.norm(), b.norm());
    if na.is_zero() || nb.is_zero() {
        return Err(EncodeError::ZeroVector);
    }
    let dot = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(&x, &y)| x * y)
        .fold(S::zero(), |acc, v| acc + v);
    Ok(dot / (na * nb))
}

/// Pluggable text encoder.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Encoder {
    /// Seeded signed feature hashing of whitespace tokens.
    Local { dim: usize, seed: u64 },
    /// Hosted embeddings endpoint.
    Remote {
        endpoint: String,
        model: String,
        timeout_s: f64,
        #[serde(default)]
        max_retries: u32,
    },
}

impl Encoder {
    pub fn local(dim: usize, seed: u64) -> Self {
        Encoder::Local { dim, seed }
    }
}

fn fnv1a64(seed: u64, bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64 ^ crate::n2v::splitmix64(seed);
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01B3);
    }
    hash
}

/// Encode trimmed text to a unit vector. The local path is pure: the same
/// `(text, encoder)` always produces the same vector.
pub fn encode_text(text: &str, encoder: &Encoder) -> Result<Vector<Real>, EncodeError> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Err(EncodeError::EmptyText);
    }
    match encoder {
        Encoder::Local { dim, seed } => {
            if *dim < 8 {
                return Err(EncodeError::DimensionTooSmall(*dim));
            }
            let mut components = vec![0.0; *dim];
            for token in trimmed.split_whitespace() {
                let h = fnv1a64(*seed, token.as_bytes());
                let bucket = ((h >> 1) % *dim as u64) as usize;
                let sign = if h & 1 == 0 { 1.0 } else { -1.0 };
                components[bucket] += sign;
            }
            // opposing tokens can cancel exactly; fall back to a bucket
            // derived from the whole text so the output stays unit-norm
            if components.iter().all(|&c| c == 0.0) {
                let h = fnv1a64(*seed, trimmed.as_bytes());
                components[((h >> 1) % *dim as u64) as usize] = 1.0;
            }
            Vector::new(components)?.normalized()
        }
        Encoder::Remote { endpoint, model, timeout_s, max_retries } => {
            let raw = llm::embedding(
                endpoint,
                model,
                trimmed,
                Duration::from_secs_f64(*timeout_s),
                *max_retries,
            )?;
            Vector::new(raw)?.normalized()
        }
    }
}

/// Encode a triple as the string `"subject relation object"`.
pub fn encode_triple(
    triple: &crate::extraction::Triple,
    encoder: &Encoder,
) -> Result<Vector<Real>, EncodeError> {
    let text = format!("{} {} {}", triple.subject, triple.relation, triple.object);
    encode_text(&text, encoder)
}

/// Sort key identifying one graph edge by surface strings.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeKey {
    pub src: String,
    pub rel: String,
    pub dst: String,
}

impl std::fmt::Display for EdgeKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {})", self.src, self.rel, self.dst)
    }
}

/// One encoded edge with its endpoint node ids.
#[derive(Debug, Clone)]
pub struct IndexEntry {
    pub key: EdgeKey,
    pub vec: Vector<Real>,
    pub src: NodeId,
    pub dst: NodeId,
}

/// Per-edge encoding index: one unit vector for every graph edge, entries
/// sorted by edge key for deterministic downstream order.
#[derive(Debug, Clone)]
pub struct TripleIndex {
    dim: usize,
    entries: Vec<IndexEntry>,
}

impl TripleIndex {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Encode every edge of the graph as "src rel dst".
    pub fn build(graph: &TemporalGraph, encoder: &Encoder) -> Result<Self, EncodeError> {
        let mut entries = Vec::with_capacity(graph.edge_count());
        let mut dim = 0;
        for edge in graph.edges() {
            let key = EdgeKey {
                src: graph.node_name(edge.src).expect("edge endpoints exist").to_owned(),
                rel: edge.rel.clone(),
                dst: graph.node_name(edge.dst).expect("edge endpoints exist").to_owned(),
            };
            let text = format!("{} {} {}", key.src, key.rel, key.dst);
            let vec = encode_text(&text, encoder)?;
            dim = vec.dim();
            entries.push(IndexEntry { key, vec, src: edge.src, dst: edge.dst });
        }
        entries.sort_by(|a, b| a.key.cmp(&b.key));
        Ok(Self { dim, entries })
    }

    pub fn save(&self, path: &Path) -> Result<(), EncodeError> {
        let file = IndexFile {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .map(|e| IndexFileEntry {
                    edge: [e.key.src.clone(), e.key.rel.clone(), e.key.dst.clone()],
                    vec: e.vec.as_slice().to_vec(),
                })
                .collect(),
        };
        let out = BufWriter::new(File::create(path)?);
        serde_json::to_writer(out, &file)?;
        Ok(())
    }

    /// Load and re-bind entries to graph node ids by name.
    pub fn load(path: &Path, graph: &TemporalGraph) -> Result<Self, EncodeError> {
        let file: IndexFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let mut entries = Vec::with_capacity(file.entries.len());
        for entry in file.entries {
            let [src_name, rel, dst_name] = entry.edge;
            let src = graph
                .node_id(&src_name)
                .ok_or_else(|| EncodeError::UnknownIndexNode(src_name.clone()))?;
            let dst = graph
                .node_id(&dst_name)
                .ok_or_else(|| EncodeError::UnknownIndexNode(dst_name.clone()))?;
            entries.push(IndexEntry {
                key: EdgeKey { src: src_name, rel, dst: dst_name },
                vec: Vector::new(entry.vec)?,
                src,
                dst,
            });
        }
        entries.sort_by(|a, b| a.key.cmp(&b.key));
        Ok(Self { dim: file.dim, entries })
    }
}

#[derive(Serialize, Deserialize)]
struct IndexFile {
    dim: usize,
    entries: Vec<IndexFileEntry>,
}

#[derive(Serialize, Deserialize)]
struct IndexFileEntry {
    edge: [String; 3],
    vec: Vec<f64>,
}
