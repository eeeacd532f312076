//! Node2vec embeddings: biased (optionally temporal) random walks plus a
//! from-scratch skip-gram trainer with negative sampling, and the exact
//! softmax as the verification oracle.

mod matrix;
mod train;
mod walks;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use matrix::{cosine_rows, load_embeddings, save_embeddings, softmax_prob, EmbeddingMatrix};
pub use train::{train_skipgram, train_skipgram_parallel, TrainOutcome};
pub use walks::{sample_walks, sample_walks_detailed, TemporalWalk};

#[derive(Debug, Error)]
pub enum N2vError {
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("vocabulary is empty")]
    EmptyVocabulary,
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed embeddings file: {0}")]
    BadJson(#[from] serde_json::Error),
    #[error("malformed embeddings file: {0}")]
    BadFile(String),
}

/// Random-walk parameters. `p` penalizes returning to the previous node,
/// `q` penalizes moving outward; `temporal` enforces non-decreasing edge
/// timestamps along the walk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WalkConfig {
    pub walks_per_node: usize,
    pub walk_length: usize,
    pub p: f64,
    pub q: f64,
    pub temporal: bool,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self {
            walks_per_node: 10,
            walk_length: 20,
            p: 1.0,
            q: 1.0,
            temporal: true,
            seed: 42,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<(), N2vError> {
        if self.walks_per_node < 1 {
            return Err(N2vError::InvalidConfig("walks_per_node must be >= 1"));
        }
        if self.walk_length < 1 {
            return Err(N2vError::InvalidConfig("walk_length must be >= 1"));
        }
        if !(self.p > 0.0) || !(self.q > 0.0) {
            return Err(N2vError::InvalidConfig("p and q must be positive"));
        }
        Ok(())
    }
}

/// Skip-gram training parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub initial_lr: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dim: 128,
            window: 5,
            negatives: 5,
            epochs: 5,
            initial_lr: 0.025,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), N2vError> {
        if self.dim < 2 {
            return Err(N2vError::InvalidConfig("dim must be >= 2"));
        }
        if self.window < 1 {
            return Err(N2vError::InvalidConfig("window must be >= 1"));
        }
        if self.negatives < 1 {
            return Err(N2vError::InvalidConfig("negatives must be >= 1"));
        }
        if !(self.initial_lr > 0.0) {
            return Err(N2vError::InvalidConfig("initial_lr must be positive"));
        }
        Ok(())
    }
}

/// Derive an independent sub-seed from a base seed (SplitMix64 finalizer).
pub fn splitmix_seed(x: u64) -> u64 {
    splitmix64(x)
}

/// SplitMix64 finalizer; used to derive independent sub-seeds from one
/// user-facing seed.
pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}
