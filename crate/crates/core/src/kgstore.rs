//! Embedded temporal labeled-property graph.
//!
//! Nodes are normalized entity names; edges are `(src, rel, dst)` keys
//! carrying a sorted list of `(timestamp, tweet id)` occurrences. Merging
//! follows insert-if-absent semantics: re-merging an identical assertion
//! with identical provenance is a no-op, while new provenance accumulates
//! on the existing edge.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Tweet;
use crate::extraction::{normalize_term, Triple};

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("unknown node id {0:?}")]
    UnknownNode(NodeId),
    #[error("unknown node name {0:?}")]
    UnknownName(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt graph file {file} at line {line}: {reason}")]
    CorruptFile {
        file: String,
        line: u64,
        reason: String,
    },
}

/// Dense node handle, stable for the lifetime of a graph instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub(crate) u32);

impl NodeId {
    /// Wrap a dense 0-based index. Handles are only meaningful against the
    /// graph (or embedding matrix) they index into.
    pub fn new(index: u32) -> Self {
        NodeId(index)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// One provenance point: the edge was asserted by `tweet` at time `ts`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Occurrence {
    pub ts: i64,
    pub tweet: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub src: NodeId,
    pub rel: String,
    pub dst: NodeId,
    /// Sorted ascending by `(ts, tweet)`, never empty, no duplicates.
    pub occurrences: Vec<Occurrence>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Out,
    In,
    Both,
}

/// Result of merging one triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MergeOutcome {
    pub nodes_created: usize,
    pub edge_created: bool,
}

#[derive(Debug, Default, Clone)]
pub struct TemporalGraph {
    names: Vec<String>,
    name_index: HashMap<String, NodeId>,
    edges: Vec<Edge>,
    edge_index: HashMap<(NodeId, String, NodeId), usize>,
    outgoing: Vec<Vec<usize>>,
    incoming: Vec<Vec<usize>>,
}

impl PartialEq for TemporalGraph {
    /// Structural equality: same node names (same ids) and same edges with
    /// the same occurrence lists. Index structures are derived state.
    fn eq(&self, other: &Self) -> bool {
        self.names == other.names && self.edges == other.edges
    }
}

impl TemporalGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.names.len() as u32).map(NodeId)
    }

    pub fn node_names(&self) -> &[String] {
        &self.names
    }

    pub fn node_name(&self, id: NodeId) -> Result<&str, GraphError> {
        self.names
            .get(id.index())
            .map(String::as_str)
            .ok_or(GraphError::UnknownNode(id))
    }

    /// Look up a node by (normalized) name.
    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        self.name_index.get(&normalize_term(name)).copied()
    }

    fn intern(&mut self, name: &str) -> (NodeId, bool) {
        let name = normalize_term(name);
        if let Some(&id) = self.name_index.get(&name) {
            return (id, false);
        }
        let id = NodeId(self.names.len() as u32);
        self.names.push(name.clone());
        self.name_index.insert(name, id);
        self.outgoing.push(Vec::new());
        self.incoming.push(Vec::new());
        (id, true)
    }

    /// Insert-if-absent merge of one triple with its provenance.
    pub fn merge_triple(&mut self, triple: &Triple) -> MergeOutcome {
        let (src, src_new) = self.intern(&triple.subject);
        let (dst, dst_new) = self.intern(&triple.object);
        let rel = normalize_term(&triple.relation);
        let occurrence = Occurrence {
            ts: triple.timestamp,
            tweet: triple.source,
        };

        let key = (src, rel.clone(), dst);
        let mut outcome = MergeOutcome {
            nodes_created: usize::from(src_new) + usize::from(dst_new),
            edge_created: false,
        };
        match self.edge_index.get(&key) {
            Some(&idx) => {
                let occ = &mut self.edges[idx].occurrences;
                if let Err(pos) = occ.binary_search(&occurrence) {
                    occ.insert(pos, occurrence);
                }
            }
            None => {
                let idx = self.edges.len();
                self.edges.push(Edge {
                    src,
                    rel,
                    dst,
                    occurrences: vec![occurrence],
                });
                self.edge_index.insert(key, idx);
                self.outgoing[src.index()].push(idx);
                self.incoming[dst.index()].push(idx);
                outcome.edge_created = true;
            }
        }
        outcome
    }

    /// Whether any edge (either direction, any relation) joins `a` and `b`.
    pub fn adjacent(&self, a: NodeId, b: NodeId) -> bool {
        let scan = |edges: &[usize], other: NodeId, incoming: bool| {
            edges.iter().any(|&i| {
                let e = &self.edges[i];
                if incoming { e.src == other } else { e.dst == other }
            })
        };
        scan(&self.outgoing[a.index()], b, false) || scan(&self.incoming[a.index()], b, true)
    }

    /// Incident edges and the node on the far side, in deterministic order
    /// (ascending neighbor id, then relation string).
    pub fn neighbors(
        &self,
        node: NodeId,
        direction: Direction,
    ) -> Result<Vec<(&Edge, NodeId)>, GraphError> {
        if node.index() >= self.names.len() {
            return Err(GraphError::UnknownNode(node));
        }
        let mut edge_ids: Vec<usize> = match direction {
            Direction::Out => self.outgoing[node.index()].clone(),
            Direction::In => self.incoming[node.index()].clone(),
            Direction::Both => {
                let mut ids = self.outgoing[node.index()].clone();
                ids.extend(&self.incoming[node.index()]);
                ids.sort_unstable();
                ids.dedup();
                ids
            }
        };
        let far = |idx: usize| {
            let e = &self.edges[idx];
            if e.src == node { e.dst } else { e.src }
        };
        edge_ids.sort_by(|&a, &b| {
            (far(a), &self.edges[a].rel).cmp(&(far(b), &self.edges[b].rel))
        });
        Ok(edge_ids.into_iter().map(|i| (&self.edges[i], far(i))).collect())
    }

    /// Source sentences for the subgraph induced by `nodes`: the union of
    /// tweets over all occurrences of edges with both endpoints inside the
    /// set, deduplicated by tweet id and sorted by `(timestamp, tweet id)`.
    pub fn provenance_sentences(
        &self,
        nodes: &BTreeSet<NodeId>,
        corpus: &[Tweet],
    ) -> Vec<(i64, u64, String)> {
        let mut seen: HashSet<u64> = HashSet::new();
        let mut out: Vec<(i64, u64, String)> = Vec::new();
        for edge in &self.edges {
            if !(nodes.contains(&edge.src) && nodes.contains(&edge.dst)) {
                continue;
            }
            for occ in &edge.occurrences {
                if seen.insert(occ.tweet) {
                    if let Some(tweet) = lookup_tweet(corpus, occ.tweet) {
                        out.push((tweet.ts, tweet.id, tweet.text.clone()));
                    }
                }
            }
        }
        out.sort_by_key(|&(ts, id, _)| (ts, id));
        out
    }

    /// Write the graph as two JSONL files.
    pub fn save(&self, nodes_path: &Path, edges_path: &Path) -> Result<(), GraphError> {
        let mut nodes_out = BufWriter::new(File::create(nodes_path)?);
        for (i, name) in self.names.iter().enumerate() {
            let row = NodeRow { id: i as u32, name: name.clone() };
            writeln!(nodes_out, "{}", serde_json::to_string(&row).expect("serializable"))?;
        }
        nodes_out.flush()?;

        let mut edges_out = BufWriter::new(File::create(edges_path)?);
        for edge in &self.edges {
            let row = EdgeRow {
                src: edge.src.0,
                rel: edge.rel.clone(),
                dst: edge.dst.0,
                occ: edge.occurrences.iter().map(|o| (o.ts, o.tweet)).collect(),
            };
            writeln!(edges_out, "{}", serde_json::to_string(&row).expect("serializable"))?;
        }
        edges_out.flush()?;
        Ok(())
    }

    /// Load a graph previously written by [`TemporalGraph::save`], rebuilding
    /// all index structures and validating every invariant on the way in.
    pub fn load(nodes_path: &Path, edges_path: &Path) -> Result<Self, GraphError> {
        let corrupt = |file: &Path, line: u64, reason: String| GraphError::CorruptFile {
            file: file.display().to_string(),
            line,
            reason,
        };

        let mut graph = TemporalGraph::new();
        let nodes_data = std::fs::read_to_string(nodes_path)?;
        for (lineno, line) in nodes_data.lines().enumerate() {
            let lineno = lineno as u64 + 1;
            if line.trim().is_empty() {
                continue;
            }
            let row: NodeRow = serde_json::from_str(line)
                .map_err(|e| corrupt(nodes_path, lineno, e.to_string()))?;
            if row.id as usize != graph.names.len() {
                return Err(corrupt(
                    nodes_path,
                    lineno,
                    format!("non-sequential node id {}", row.id),
                ));
            }
            if graph.name_index.contains_key(&row.name) {
                return Err(corrupt(nodes_path, lineno, format!("duplicate name {:?}", row.name)));
            }
            graph.name_index.insert(row.name.clone(), NodeId(row.id));
            graph.names.push(row.name);
            graph.outgoing.push(Vec::new());
            graph.incoming.push(Vec::new());
        }

        let edges_data = std::fs::read_to_string(edges_path)?;
        for (lineno, line) in edges_data.lines().enumerate() {
            let lineno = lineno as u64 + 1;
            if line.trim().is_empty() {
                continue;
            }
            let row: EdgeRow = serde_json::from_str(line)
                .map_err(|e| corrupt(edges_path, lineno, e.to_string()))?;
            let n = graph.names.len() as u32;
            if row.src >= n || row.dst >= n {
                return Err(corrupt(edges_path, lineno, "dangling node id".into()));
            }
            if row.occ.is_empty() {
                return Err(corrupt(edges_path, lineno, "edge with no occurrences".into()));
            }
            let occurrences: Vec<Occurrence> = row
                .occ
                .iter()
                .map(|&(ts, tweet)| Occurrence { ts, tweet })
                .collect();
            if occurrences.windows(2).any(|w| w[0] >= w[1]) {
                return Err(corrupt(edges_path, lineno, "occurrences not strictly sorted".into()));
            }
            let key = (NodeId(row.src), row.rel.clone(), NodeId(row.dst));
            if graph.edge_index.contains_key(&key) {
                return Err(corrupt(edges_path, lineno, "duplicate edge key".into()));
            }
            let idx = graph.edges.len();
            graph.edges.push(Edge {
                src: NodeId(row.src),
                rel: row.rel,
                dst: NodeId(row.dst),
                occurrences,
            });
            graph.edge_index.insert(key, idx);
            graph.outgoing[row.src as usize].push(idx);
            graph.incoming[row.dst as usize].push(idx);
        }
        Ok(graph)
    }
}

fn lookup_tweet(corpus: &[Tweet], id: u64) -> Option<&Tweet> {
    // ids are the ingestion order, so the common case is direct indexing
    match corpus.get(id as usize) {
        Some(t) if t.id == id => Some(t),
        _ => corpus.binary_search_by_key(&id, |t| t.id).ok().map(|i| &corpus[i]),
    }
}

#[derive(Serialize, Deserialize)]
struct NodeRow {
    id: u32,
    name: String,
}

#[derive(Serialize, Deserialize)]
struct EdgeRow {
    src: u32,
    rel: String,
    dst: u32,
    occ: Vec<(i64, u64)>,
}
