//! Skip-gram training with negative sampling over sampled walks.
//!
//! The single-worker path is bit-deterministic for a fixed seed: embeddings
//! are initialized from the seed, negatives come from a seeded generator,
//! and pairs are visited in walk order. The multi-worker path trades that
//! determinism for throughput (updates race benignly, hogwild style).

use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::kgstore::NodeId;
use crate::scalar::Scalar;
use crate::Real;

use super::matrix::{dot, EmbeddingMatrix};
use super::{splitmix64, N2vError, TrainConfig};

const INIT_SALT: u64 = 0x1b87_3c9f_55aa_0e11;
const TRAIN_SALT: u64 = 0x7f4a_9c22_d380_6b5e;
const NEGATIVE_EXPONENT: f64 = 0.75;
/// Learning rate decays linearly to `initial_lr / LR_FLOOR_DIVISOR`.
const LR_FLOOR_DIVISOR: f64 = 100.0;

/// Trained embeddings plus the mean negative-sampling loss per epoch.
#[derive(Debug, Clone)]
pub struct TrainOutcome<S: Scalar = Real> {
    pub embeddings: EmbeddingMatrix<S>,
    pub epoch_loss: Vec<f64>,
}

/// Cumulative unigram^0.75 distribution over nodes appearing in walks.
struct NegativeTable {
    cumulative: Vec<f64>,
    total: f64,
}

impl NegativeTable {
    fn build(walks: &[Vec<NodeId>], vocab: usize) -> Self {
        let mut counts = vec![0u64; vocab];
        for walk in walks {
            for node in walk {
                counts[node.index()] += 1;
            }
        }
        let mut cumulative = Vec::with_capacity(vocab);
        let mut total = 0.0;
        for c in counts {
            total += (c as f64).powf(NEGATIVE_EXPONENT);
            cumulative.push(total);
        }
        Self { cumulative, total }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> NodeId {
        let target = rng.random::<f64>() * self.total;
        let idx = self.cumulative.partition_point(|&c| c <= target);
        NodeId(idx.min(self.cumulative.len() - 1) as u32)
    }
}

fn seeded_init<S: Scalar>(vocab: usize, dim: usize, seed: u64) -> EmbeddingMatrix<S> {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ INIT_SALT));
    let scale = 1.0 / dim as f64;
    let data: Vec<S> = (0..vocab * dim)
        .map(|_| S::from_f64_lossy((rng.random::<f64>() - 0.5) * scale))
        .collect();
    EmbeddingMatrix::from_raw(vocab, dim, data)
}

/// Context pairs per walk under a fixed symmetric window.
fn pairs_in_walk(len: usize, window: usize) -> u64 {
    (0..len)
        .map(|i| {
            let lo = i.saturating_sub(window);
            let hi = (i + window).min(len.saturating_sub(1));
            (hi - lo) as u64
        })
        .sum()
}

fn stable_log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Deterministic single-worker trainer. With `epochs = 0` the returned
/// matrix is exactly the seeded initialization.
pub fn train_skipgram<S: Scalar>(
    walks: &[Vec<NodeId>],
    vocab: usize,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<S>, N2vError> {
    cfg.validate()?;
    if vocab == 0 {
        return Err(N2vError::EmptyVocabulary);
    }
    let mut input = seeded_init::<S>(vocab, cfg.dim, cfg.seed);
    let mut context = EmbeddingMatrix::<S>::zeros(vocab, cfg.dim);
    let mut epoch_loss = Vec::with_capacity(cfg.epochs);

    let pairs_per_epoch: u64 = walks.iter().map(|w| pairs_in_walk(w.len(), cfg.window)).sum();
    let total_pairs = pairs_per_epoch * cfg.epochs as u64;
    if total_pairs == 0 {
        return Ok(TrainOutcome { embeddings: input, epoch_loss });
    }

    let table = NegativeTable::build(walks, vocab);
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(cfg.seed ^ TRAIN_SALT));
    let final_lr = cfg.initial_lr / LR_FLOOR_DIVISOR;
    let mut pairs_done = 0u64;
    let mut gradient = vec![S::zero(); cfg.dim];

    for _ in 0..cfg.epochs {
        let mut loss_sum = 0.0;
        for walk in walks {
            for center_pos in 0..walk.len() {
                let lo = center_pos.saturating_sub(cfg.window);
                let hi = (center_pos + cfg.window).min(walk.len() - 1);
                for ctx_pos in lo..=hi {
                    if ctx_pos == center_pos {
                        continue;
                    }
                    let progress = pairs_done as f64 / total_pairs as f64;
                    let lr = S::from_f64_lossy(
                        (cfg.initial_lr - (cfg.initial_lr - final_lr) * progress).max(final_lr),
                    );
                    loss_sum += sgd_step(
                        &mut input,
                        &mut context,
                        walk[center_pos],
                        walk[ctx_pos],
                        &table,
                        cfg.negatives,
                        lr,
                        &mut rng,
                        &mut gradient,
                    );
                    pairs_done += 1;
                }
            }
        }
        epoch_loss.push(loss_sum / pairs_per_epoch as f64);
    }
    Ok(TrainOutcome { embeddings: input, epoch_loss })
}

/// One (center, context) update with `negatives` sampled negatives; returns
/// the pair's negative-sampling loss.
#[allow(clippy::too_many_arguments)]
fn sgd_step<S: Scalar>(
    input: &mut EmbeddingMatrix<S>,
    context: &mut EmbeddingMatrix<S>,
    center: NodeId,
    positive: NodeId,
    table: &NegativeTable,
    negatives: usize,
    lr: S,
    rng: &mut ChaCha8Rng,
    gradient: &mut [S],
) -> f64 {
    gradient.fill(S::zero());
    let input_row: Vec<S> = input.row(center).to_vec();
    let mut loss = 0.0;

    // positive target has label 1, negatives label 0; the gradient w.r.t.
    // the center row accumulates over all targets and is applied once
    let mut apply = |target: NodeId, label: f64| {
        let ctx_row = context.row_mut(target);
        let score = dot(&input_row, ctx_row).as_f64();
        let f = 1.0 / (1.0 + (-score).exp());
        let g = S::from_f64_lossy(label - f) * lr;
        for (gd, (&z, c)) in gradient
            .iter_mut()
            .zip(input_row.iter().zip(ctx_row.iter_mut()))
        {
            *gd += g * *c;
            *c += g * z;
        }
        if label > 0.5 {
            -stable_log_sigmoid(score)
        } else {
            -stable_log_sigmoid(-score)
        }
    };

    loss += apply(positive, 1.0);
    for _ in 0..negatives {
        let sampled = table.draw(rng);
        if sampled == positive {
            continue;
        }
        loss += apply(sampled, 0.0);
    }
    drop(apply);
    for (z, &g) in input.row_mut(center).iter_mut().zip(gradient.iter()) {
        *z += g;
    }
    loss
}

/// Hogwild-style multi-worker trainer over `f64` embeddings. Worker updates
/// race benignly (relaxed atomic loads/stores), so results vary run to run;
/// use [`train_skipgram`] when reproducibility matters.
pub fn train_skipgram_parallel(
    walks: &[Vec<NodeId>],
    vocab: usize,
    cfg: &TrainConfig,
    workers: usize,
) -> Result<TrainOutcome<Real>, N2vError> {
    if workers <= 1 {
        return train_skipgram(walks, vocab, cfg);
    }
    cfg.validate()?;
    if vocab == 0 {
        return Err(N2vError::EmptyVocabulary);
    }

    let init = seeded_init::<Real>(vocab, cfg.dim, cfg.seed);
    let input: Vec<AtomicU64> = init.rows().flatten().map(|v| AtomicU64::new(v.to_bits())).collect();
    let context: Vec<AtomicU64> = (0..vocab * cfg.dim).map(|_| AtomicU64::new(0f64.to_bits())).collect();

    let pairs_per_epoch: u64 = walks.iter().map(|w| pairs_in_walk(w.len(), cfg.window)).sum();
    let total_pairs = pairs_per_epoch * cfg.epochs as u64;
    if total_pairs == 0 {
        return Ok(TrainOutcome { embeddings: init, epoch_loss: Vec::new() });
    }
    let table = NegativeTable::build(walks, vocab);
    let final_lr = cfg.initial_lr / LR_FLOOR_DIVISOR;
    let dim = cfg.dim;

    let load = |cells: &[AtomicU64], row: usize, buf: &mut [f64]| {
        for (i, b) in buf.iter_mut().enumerate() {
            *b = f64::from_bits(cells[row * dim + i].load(Ordering::Relaxed));
        }
    };
    let epoch_losses: Vec<std::sync::Mutex<Vec<f64>>> =
        (0..cfg.epochs).map(|_| std::sync::Mutex::new(Vec::new())).collect();

    std::thread::scope(|scope| {
        for worker in 0..workers {
            let input = &input;
            let context = &context;
            let table = &table;
            let epoch_losses = &epoch_losses;
            scope.spawn(move || {
                let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(
                    cfg.seed ^ TRAIN_SALT ^ (worker as u64 + 1),
                ));
                let mut zbuf = vec![0.0; dim];
                let mut cbuf = vec![0.0; dim];
                let mut grad = vec![0.0; dim];
                let my_walks: Vec<&Vec<NodeId>> =
                    walks.iter().skip(worker).step_by(workers).collect();
                let my_pairs: u64 =
                    my_walks.iter().map(|w| pairs_in_walk(w.len(), cfg.window)).sum();
                let my_total = (my_pairs * cfg.epochs as u64).max(1);
                let mut done = 0u64;

                for epoch in 0..cfg.epochs {
                    let mut loss_sum = 0.0;
                    for walk in &my_walks {
                        for center_pos in 0..walk.len() {
                            let lo = center_pos.saturating_sub(cfg.window);
                            let hi = (center_pos + cfg.window).min(walk.len() - 1);
                            for ctx_pos in lo..=hi {
                                if ctx_pos == center_pos {
                                    continue;
                                }
                                let progress = done as f64 / my_total as f64;
                                let lr = (cfg.initial_lr
                                    - (cfg.initial_lr - final_lr) * progress)
                                    .max(final_lr);
                                let center = walk[center_pos].index();
                                load(input, center, &mut zbuf);
                                grad.fill(0.0);

                                let mut targets =
                                    vec![(walk[ctx_pos], 1.0f64)];
                                for _ in 0..cfg.negatives {
                                    let s = table.draw(&mut rng);
                                    if s != walk[ctx_pos] {
                                        targets.push((s, 0.0));
                                    }
                                }
                                for &(target, label) in &targets {
                                    load(context, target.index(), &mut cbuf);
                                    let score: f64 =
                                        zbuf.iter().zip(&cbuf).map(|(a, b)| a * b).sum();
                                    let f = 1.0 / (1.0 + (-score).exp());
                                    let g = (label - f) * lr;
                                    for i in 0..dim {
                                        grad[i] += g * cbuf[i];
                                        let cell = &context[target.index() * dim + i];
                                        let updated = cbuf[i] + g * zbuf[i];
                                        cell.store(updated.to_bits(), Ordering::Relaxed);
                                    }
                                    loss_sum += if label > 0.5 {
                                        -stable_log_sigmoid(score)
                                    } else {
                                        -stable_log_sigmoid(-score)
                                    };
                                }
                                for i in 0..dim {
                                    let cell = &input[center * dim + i];
                                    let updated = zbuf[i] + grad[i];
                                    cell.store(updated.to_bits(), Ordering::Relaxed);
                                }
                                done += 1;
                            }
                        }
                    }
                    epoch_losses[epoch].lock().unwrap().push(loss_sum);
                }
            });
        }
    });

    let data: Vec<f64> = input.iter().map(|c| f64::from_bits(c.load(Ordering::Relaxed))).collect();
    let epoch_loss = epoch_losses
        .iter()
        .map(|m| m.lock().unwrap().iter().sum::<f64>() / pairs_per_epoch as f64)
        .collect();
    Ok(TrainOutcome {
        embeddings: EmbeddingMatrix::from_raw(vocab, cfg.dim, data),
        epoch_loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extraction::Triple;
    use crate::kgstore::TemporalGraph;
    use crate::n2v::{sample_walks, WalkConfig};

    fn ring_graph(n: u64) -> TemporalGraph {
        let mut g = TemporalGraph::new();
        for i in 0..n {
            g.merge_triple(
                &Triple::new(&format!("n{i}"), "r", &format!("n{}", (i + 1) % n), i, 0).unwrap(),
            );
        }
        g
    }

    fn small_cfg(seed: u64) -> TrainConfig {
        TrainConfig { dim: 16, window: 3, negatives: 5, epochs: 3, initial_lr: 0.025, seed }
    }

    #[test]
    fn zero_epochs_returns_seeded_init_exactly() {
        let cfg = TrainConfig { epochs: 0, ..small_cfg(11) };
        let out: TrainOutcome = train_skipgram(&[], 7, &cfg).unwrap();
        assert_eq!(out.embeddings, seeded_init::<Real>(7, cfg.dim, cfg.seed));
        assert!(out.epoch_loss.is_empty());
    }

    #[test]
    fn shape_and_finiteness() {
        let g = ring_graph(8);
        let walks = sample_walks(&g, &WalkConfig { walks_per_node: 4, walk_length: 8, temporal: false, ..WalkConfig::default() }).unwrap();
        let out: TrainOutcome = train_skipgram(&walks, g.node_count(), &small_cfg(3)).unwrap();
        assert_eq!(out.embeddings.node_count(), 8);
        assert_eq!(out.embeddings.dim(), 16);
        assert!(out.embeddings.is_finite());
    }

    #[test]
    fn empty_vocabulary_is_an_error() {
        assert!(matches!(
            train_skipgram::<Real>(&[], 0, &small_cfg(1)),
            Err(N2vError::EmptyVocabulary)
        ));
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let g = ring_graph(10);
        let walks = sample_walks(&g, &WalkConfig { walks_per_node: 3, walk_length: 6, temporal: false, ..WalkConfig::default() }).unwrap();
        let a: TrainOutcome = train_skipgram(&walks, 10, &small_cfg(5)).unwrap();
        let b: TrainOutcome = train_skipgram(&walks, 10, &small_cfg(5)).unwrap();
        assert_eq!(a.embeddings, b.embeddings);
        assert_eq!(a.epoch_loss, b.epoch_loss);
        let c: TrainOutcome = train_skipgram(&walks, 10, &small_cfg(6)).unwrap();
        assert_ne!(a.embeddings, c.embeddings);
    }

    #[test]
    fn loss_improves_on_fixed_graph_for_most_seeds() {
        let g = ring_graph(20);
        let mut improved = 0;
        for seed in 0..20u64 {
            let walks = sample_walks(
                &g,
                &WalkConfig { walks_per_node: 5, walk_length: 10, temporal: false, seed, ..WalkConfig::default() },
            )
            .unwrap();
            let cfg = TrainConfig { epochs: 5, ..small_cfg(seed) };
            let out: TrainOutcome = train_skipgram(&walks, 20, &cfg).unwrap();
            if out.epoch_loss[cfg.epochs - 1] < out.epoch_loss[0] {
                improved += 1;
            }
        }
        assert!(improved >= 18, "loss improved for only {improved}/20 seeds");
    }

    #[test]
    fn trains_at_f32_too() {
        let g = ring_graph(6);
        let walks = sample_walks(&g, &WalkConfig { walks_per_node: 2, walk_length: 5, temporal: false, ..WalkConfig::default() }).unwrap();
        let out: TrainOutcome<f32> = train_skipgram(&walks, 6, &small_cfg(4)).unwrap();
        assert_eq!(out.embeddings.dim(), 16);
        assert!(out.embeddings.is_finite());
    }

    #[test]
    fn parallel_mode_produces_finite_embeddings() {
        let g = ring_graph(12);
        let walks = sample_walks(&g, &WalkConfig { walks_per_node: 4, walk_length: 8, temporal: false, ..WalkConfig::default() }).unwrap();
        let out = train_skipgram_parallel(&walks, 12, &small_cfg(2), 4).unwrap();
        assert_eq!(out.embeddings.node_count(), 12);
        assert!(out.embeddings.is_finite());
        assert_eq!(out.epoch_loss.len(), 3);
    }
}
