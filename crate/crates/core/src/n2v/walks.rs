//! Second-order biased random walks with an optional temporal constraint.
//!
//! Every `(start node, walk index)` pair derives its own RNG seed, so the
//! sampled walks are identical for identical `(graph, config)` regardless of
//! scheduling, platform, or iteration order.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::kgstore::{NodeId, TemporalGraph};

use super::{splitmix64, N2vError, WalkConfig};

const WALK_SALT: u64 = 0x9d5c_22e4_3f1a_77b1;

/// One sampled walk plus the timestamp of each step taken.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemporalWalk {
    pub nodes: Vec<NodeId>,
    /// `step_timestamps[i]` is the occurrence time used for the transition
    /// `nodes[i] -> nodes[i+1]`; length is `nodes.len() - 1`.
    pub step_timestamps: Vec<i64>,
}

/// Walks as plain node sequences.
pub fn sample_walks(graph: &TemporalGraph, cfg: &WalkConfig) -> Result<Vec<Vec<NodeId>>, N2vError> {
    Ok(sample_walks_detailed(graph, cfg)?
        .into_iter()
        .map(|w| w.nodes)
        .collect())
}

/// Walks with per-step timestamps, for temporal-validity checks.
pub fn sample_walks_detailed(
    graph: &TemporalGraph,
    cfg: &WalkConfig,
) -> Result<Vec<TemporalWalk>, N2vError> {
    cfg.validate()?;
    if graph.is_empty() {
        return Err(N2vError::EmptyGraph);
    }

    let incident = incident_lists(graph);
    let adjacency = pair_set(graph);

    let mut walks = Vec::with_capacity(graph.node_count() * cfg.walks_per_node);
    for start in graph.node_ids() {
        for walk_idx in 0..cfg.walks_per_node {
            let seed = splitmix64(
                cfg.seed ^ WALK_SALT ^ ((start.index() as u64) << 20 ^ walk_idx as u64),
            );
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            walks.push(single_walk(graph, cfg, &incident, &adjacency, start, &mut rng));
        }
    }
    Ok(walks)
}

/// Per-node incident edge list `(edge index, far node)` in the same
/// deterministic order the graph reports neighbors: ascending far node,
/// then relation, then edge index.
fn incident_lists(graph: &TemporalGraph) -> Vec<Vec<(usize, NodeId)>> {
    let mut incident: Vec<Vec<(usize, NodeId)>> = vec![Vec::new(); graph.node_count()];
    for (idx, edge) in graph.edges().iter().enumerate() {
        incident[edge.src.index()].push((idx, edge.dst));
        if edge.src != edge.dst {
            incident[edge.dst.index()].push((idx, edge.src));
        }
    }
    for list in &mut incident {
        list.sort_by(|&(ia, na), &(ib, nb)| {
            (na, &graph.edges()[ia].rel, ia).cmp(&(nb, &graph.edges()[ib].rel, ib))
        });
    }
    incident
}

fn pair_set(graph: &TemporalGraph) -> HashSet<(NodeId, NodeId)> {
    graph
        .edges()
        .iter()
        .map(|e| if e.src <= e.dst { (e.src, e.dst) } else { (e.dst, e.src) })
        .collect()
}

fn adjacent(adjacency: &HashSet<(NodeId, NodeId)>, a: NodeId, b: NodeId) -> bool {
    let key = if a <= b { (a, b) } else { (b, a) };
    adjacency.contains(&key)
}

/// State of the step that led to the current node.
struct PrevStep {
    node: NodeId,
    edge: usize,
    occurrence: usize,
    ts: i64,
}

fn single_walk(
    graph: &TemporalGraph,
    cfg: &WalkConfig,
    incident: &[Vec<(usize, NodeId)>],
    adjacency: &HashSet<(NodeId, NodeId)>,
    start: NodeId,
    rng: &mut ChaCha8Rng,
) -> TemporalWalk {
    let mut nodes = vec![start];
    let mut step_timestamps = Vec::new();
    let mut prev: Option<PrevStep> = None;
    let mut current = start;

    while nodes.len() < cfg.walk_length {
        // admissible candidates: (edge idx, far node, occurrence idx, step ts, weight)
        let mut candidates: Vec<(usize, NodeId, usize, i64)> = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        for &(edge_idx, far) in &incident[current.index()] {
            let occurrences = &graph.edges()[edge_idx].occurrences;
            let occ_idx = match (&prev, cfg.temporal) {
                (_, false) | (None, true) => 0,
                (Some(p), true) => {
                    // earliest occurrence at or after the previous step's
                    // time; re-crossing the edge just used needs a later
                    // occurrence than the one already consumed
                    let mut pos = occurrences.partition_point(|o| o.ts < p.ts);
                    if edge_idx == p.edge && pos == p.occurrence {
                        pos += 1;
                    }
                    if pos >= occurrences.len() {
                        continue;
                    }
                    pos
                }
            };
            let weight = match &prev {
                None => 1.0,
                Some(p) if far == p.node => 1.0 / cfg.p,
                Some(p) if adjacent(adjacency, far, p.node) => 1.0,
                Some(_) => 1.0 / cfg.q,
            };
            candidates.push((edge_idx, far, occ_idx, occurrences[occ_idx].ts));
            weights.push(weight);
        }
        if candidates.is_empty() {
            break;
        }

        let total: f64 = weights.iter().sum();
        let mut target = rng.random::<f64>() * total;
        let mut chosen = candidates.len() - 1;
        for (i, w) in weights.iter().enumerate() {
            target -= w;
            if target < 0.0 {
                chosen = i;
                break;
            }
        }
        let (edge_idx, far, occ_idx, ts) = candidates[chosen];
        nodes.push(far);
        step_timestamps.push(ts);
        prev = Some(PrevStep { node: current, edge: edge_idx, occurrence: occ_idx, ts });
        current = far;
    }
    TemporalWalk { nodes, step_timestamps }
}
