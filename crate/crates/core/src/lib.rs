//! Offline-first engine for causal question answering over timestamped
//! short-text corpora.
//!
//! The pipeline: ingest and clean a CSV corpus ([`corpus`]), extract
//! subject–relation–object triples ([`extraction`]), merge them into a
//! temporal knowledge graph ([`kgstore`]), train node2vec embeddings
//! ([`n2v`]), encode per-edge triples for similarity search ([`encode`]),
//! retrieve chronologically ordered grounding context for a query
//! ([`retrieve`]), generate answers with and without that context
//! ([`generate`]), and score both against ground truth ([`evalkit`]).
//!
//! Numeric kernels are generic over [`scalar::Scalar`] (`f32` or `f64`);
//! the pipeline and all file formats use [`Real`].

pub mod corpus;
pub mod encode;
pub mod evalkit;
pub mod extraction;
pub mod generate;
pub mod kgstore;
pub mod llm;
pub mod n2v;
pub mod retrieve;
pub mod scalar;

/// Scalar type used by the pipeline and all serialized artifacts.
pub type Real = f64;

pub use encode::{cosine_sim, encode_text, encode_triple, Encoder, TripleIndex, Vector};
pub use kgstore::{NodeId, TemporalGraph};
pub use n2v::{sample_walks, softmax_prob, train_skipgram, EmbeddingMatrix};
pub use retrieve::{ContextBundle, RetrievalConfig};
