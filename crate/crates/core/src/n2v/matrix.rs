//! Dense per-node embedding storage and the exact softmax oracle.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::kgstore::NodeId;
use crate::scalar::Scalar;
use crate::Real;

use super::N2vError;

/// Row-major `|V| x d` matrix of node embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix<S: Scalar = Real> {
    dim: usize,
    data: Vec<S>,
}

impl<S: Scalar> EmbeddingMatrix<S> {
    pub fn zeros(nodes: usize, dim: usize) -> Self {
        Self { dim, data: vec![S::zero(); nodes * dim] }
    }

    pub fn from_raw(nodes: usize, dim: usize, data: Vec<S>) -> Self {
        assert_eq!(data.len(), nodes * dim, "shape mismatch");
        Self { dim, data }
    }

    pub fn node_count(&self) -> usize {
        if self.dim == 0 { 0 } else { self.data.len() / self.dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, node: NodeId) -> &[S] {
        let start = node.index() * self.dim;
        &self.data[start..start + self.dim]
    }

    pub(crate) fn row_mut(&mut self, node: NodeId) -> &mut [S] {
        let start = node.index() * self.dim;
        &mut self.data[start..start + self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[S]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

pub(crate) fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).map(|(&x, &y)| x * y).fold(S::zero(), |acc, v| acc + v)
}

/// Cosine similarity between two embedding rows; `None` when either row has
/// zero norm.
pub fn cosine_rows<S: Scalar>(m: &EmbeddingMatrix<S>, a: NodeId, b: NodeId) -> Option<S> {
    let (ra, rb) = (m.row(a), m.row(b));
    let na = dot(ra, ra).sqrt();
    let nb = dot(rb, rb).sqrt();
    if na.is_zero() || nb.is_zero() {
        return None;
    }
    Some(dot(ra, rb) / (na * nb))
}

/// Probability of observing `v` as a neighbor of `u` under the full softmax
/// over every node (including `u` itself), log-sum-exp stabilized.
pub fn softmax_prob<S: Scalar>(m: &EmbeddingMatrix<S>, u: NodeId, v: NodeId) -> S {
    let zu = m.row(u);
    let scores: Vec<S> = m.rows().map(|zw| dot(zw, zu)).collect();
    let max = scores.iter().copied().fold(S::neg_infinity(), S::max);
    let denom: S = scores.iter().map(|&s| (s - max).exp()).fold(S::zero(), |a, b| a + b);
    (dot(m.row(v), zu) - max).exp() / denom
}

#[derive(Serialize, Deserialize)]
struct EmbeddingsFile {
    dim: usize,
    nodes: Vec<String>,
    vectors: Vec<Vec<f64>>,
}

/// Write `embeddings.json` with node names aligned to vectors by index.
pub fn save_embeddings<S: Scalar>(
    m: &EmbeddingMatrix<S>,
    names: &[String],
    path: &Path,
) -> Result<(), N2vError> {
    assert_eq!(names.len(), m.node_count(), "name/vector count mismatch");
    let file = EmbeddingsFile {
        dim: m.dim(),
        nodes: names.to_vec(),
        vectors: m.rows().map(|r| r.iter().map(|v| v.as_f64()).collect()).collect(),
    };
    let out = BufWriter::new(File::create(path)?);
    serde_json::to_writer(out, &file)?;
    Ok(())
}

pub fn load_embeddings(path: &Path) -> Result<(EmbeddingMatrix<Real>, Vec<String>), N2vError> {
    let file: EmbeddingsFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let mut data = Vec::with_capacity(file.nodes.len() * file.dim);
    for row in &file.vectors {
        if row.len() != file.dim {
            return Err(N2vError::BadFile(format!(
                "vector length {} does not match dim {}",
                row.len(),
                file.dim
            )));
        }
        data.extend_from_slice(row);
    }
    if file.vectors.len() != file.nodes.len() {
        return Err(N2vError::BadFile("node/vector count mismatch".into()));
    }
    Ok((EmbeddingMatrix::from_raw(file.nodes.len(), file.dim, data), file.nodes))
}
