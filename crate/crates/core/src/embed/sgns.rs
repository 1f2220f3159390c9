use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};

use rand::seq::SliceRandom;
use rand::RngExt;
use rayon::prelude::*;

use super::{init_vectors, EmbeddingConfig, EmbeddingSpace};
use crate::error::{Error, Result};
use crate::graph::{EntityId, EntityMap, Triple};
use crate::math::{dot, neg_log_sigmoid, sigmoid};
use crate::seed;

const TAG_WORKER: &str = "embed-worker";

/// Loss and gradient of
/// `L = -ln σ(v_h·v_t) - Σ_j ln σ(-v_h·v_{n_j})`
/// with respect to every row of `vectors` (row-major, `dim` columns).
///
/// `h`, `t` and `negs` index rows; they may repeat, in which case the
/// contributions accumulate. `grad` must have the same length as `vectors`
/// and is overwritten.
fn objective_into(
    vectors: &[f64],
    dim: usize,
    h: usize,
    t: usize,
    negs: &[usize],
    grad: &mut [f64],
) -> f64 {
    grad.iter_mut().for_each(|g| *g = 0.0);
    let row = |i: usize| &vectors[i * dim..(i + 1) * dim];
    let vh = row(h);
    let vt = row(t);

    let pos = dot(vh, vt);
    let mut loss = neg_log_sigmoid(pos);
    let c_pos = 1.0 - sigmoid(pos);
    for k in 0..dim {
        grad[h * dim + k] -= c_pos * vt[k];
        grad[t * dim + k] -= c_pos * vh[k];
    }
    for &n in negs {
        let vn = row(n);
        let s = dot(vh, vn);
        loss += neg_log_sigmoid(-s);
        let c_neg = sigmoid(s);
        for k in 0..dim {
            grad[h * dim + k] += c_neg * vn[k];
            grad[n * dim + k] += c_neg * vh[k];
        }
    }
    loss
}

/// Loss and full gradient of the negative-sampling objective for one
/// positive `(h, t)` and its negatives, over a whole matrix.
pub fn sgns_objective(
    vectors: &[f64],
    dim: usize,
    h: usize,
    t: usize,
    negs: &[usize],
) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; vectors.len()];
    let loss = objective_into(vectors, dim, h, t, negs, &mut grad);
    (loss, grad)
}

/// Matrix shared between training workers. Entries are f64 bit patterns
/// accessed with relaxed ordering; concurrent writers may lose updates.
struct SharedMatrix {
    data: Vec<AtomicU64>,
    dim: usize,
}

impl SharedMatrix {
    fn new(values: Vec<f64>, dim: usize) -> Self {
        SharedMatrix {
            data: values.into_iter().map(|v| AtomicU64::new(v.to_bits())).collect(),
            dim,
        }
    }

    fn load_row(&self, row: usize, out: &mut [f64]) {
        let src = &self.data[row * self.dim..(row + 1) * self.dim];
        for (o, a) in out.iter_mut().zip(src) {
            *o = f64::from_bits(a.load(Ordering::Relaxed));
        }
    }

    fn store_row(&self, row: usize, vals: &[f64]) {
        let dst = &self.data[row * self.dim..(row + 1) * self.dim];
        for (a, v) in dst.iter().zip(vals) {
            a.store(v.to_bits(), Ordering::Relaxed);
        }
    }

    fn into_vec(self) -> Vec<f64> {
        self.data
            .into_iter()
            .map(|a| f64::from_bits(a.into_inner()))
            .collect()
    }
}

/// Per-worker buffers for one update: the distinct rows touched, their
/// current values and the gradient.
struct Worker {
    dim: usize,
    rows: Vec<usize>,
    vals: Vec<f64>,
    grad: Vec<f64>,
    neg_rows: Vec<usize>,
    neg_slots: Vec<usize>,
}

impl Worker {
    fn new(dim: usize, neg_k: usize) -> Self {
        let cap = (neg_k + 2) * dim;
        Worker {
            dim,
            rows: Vec::with_capacity(neg_k + 2),
            vals: Vec::with_capacity(cap),
            grad: Vec::with_capacity(cap),
            neg_rows: Vec::with_capacity(neg_k),
            neg_slots: Vec::with_capacity(neg_k),
        }
    }

    fn slot(&mut self, m: &SharedMatrix, row: usize) -> usize {
        if let Some(i) = self.rows.iter().position(|&r| r == row) {
            return i;
        }
        self.rows.push(row);
        let start = self.vals.len();
        self.vals.resize(start + self.dim, 0.0);
        m.load_row(row, &mut self.vals[start..]);
        self.rows.len() - 1
    }

    fn draw_negatives(&mut self, rng: &mut seed::Rng, pool: &[usize], t: usize, k: usize) {
        self.neg_rows.clear();
        while self.neg_rows.len() < k {
            let n = pool[rng.random_range(0..pool.len())];
            if n != t {
                self.neg_rows.push(n);
            }
        }
    }

    /// One SGD step on `(h, t)` against the negatives already drawn.
    /// Returns the loss before the step, or `None` if anything went
    /// non-finite.
    fn step(&mut self, m: &SharedMatrix, h: usize, t: usize, lr: f64) -> Option<f64> {
        self.rows.clear();
        self.vals.clear();
        let hs = self.slot(m, h);
        let ts = self.slot(m, t);
        self.neg_slots.clear();
        for i in 0..self.neg_rows.len() {
            let s = self.slot(m, self.neg_rows[i]);
            self.neg_slots.push(s);
        }

        self.grad.resize(self.vals.len(), 0.0);
        let loss = objective_into(&self.vals, self.dim, hs, ts, &self.neg_slots, &mut self.grad);
        for (v, g) in self.vals.iter_mut().zip(&self.grad) {
            *v -= lr * g;
        }
        if !loss.is_finite() || self.vals.iter().any(|v| !v.is_finite()) {
            return None;
        }
        for (i, &row) in self.rows.iter().enumerate() {
            m.store_row(row, &self.vals[i * self.dim..(i + 1) * self.dim]);
        }
        Some(loss)
    }
}

/// Trains `n_entities` vectors on `train_triples` (ids are row indices).
///
/// Each epoch visits a seeded permutation of the triples; every positive
/// draws `neg_k` tails uniformly from `negative_entity_pool`, never equal to
/// its own tail. The returned space uses the identity entity map.
pub fn train_embeddings(
    train_triples: &[Triple],
    n_entities: usize,
    config: &EmbeddingConfig,
    negative_entity_pool: &[EntityId],
) -> Result<EmbeddingSpace> {
    config.validate()?;
    if train_triples.is_empty() {
        return Err(Error::param("embedding training stream is empty"));
    }
    if let Some(t) = train_triples
        .iter()
        .find(|t| t.head.index() >= n_entities || t.tail.index() >= n_entities)
    {
        return Err(Error::UnknownEntity(format!(
            "triple {t} references an entity >= {n_entities}"
        )));
    }
    let pool: Vec<usize> = negative_entity_pool.iter().map(|e| e.index()).collect();
    if pool.iter().any(|&e| e >= n_entities) {
        return Err(Error::param("negative pool references an unknown entity"));
    }
    let distinct = {
        let mut p = pool.clone();
        p.sort_unstable();
        p.dedup();
        p.len()
    };
    if distinct < 2 {
        return Err(Error::param("negative pool needs at least 2 distinct entities"));
    }

    let dim = config.dim;
    let mut rng = seed::rng_from(config.seed);
    let matrix = SharedMatrix::new(init_vectors(n_entities, dim, &mut rng), dim);
    let pairs: Vec<(usize, usize)> = train_triples
        .iter()
        .map(|t| (t.head.index(), t.tail.index()))
        .collect();

    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let total = config.epochs * pairs.len();
    let diverged = |epoch| Error::EmbeddingDiverged {
        epoch,
        lr0: config.lr0,
    };

    if config.deterministic {
        let mut worker = Worker::new(dim, config.neg_k);
        for epoch in 0..config.epochs {
            order.shuffle(&mut rng);
            let mut loss_sum = 0.0;
            for (i, &idx) in order.iter().enumerate() {
                let (h, t) = pairs[idx];
                let lr = config.learning_rate(epoch * pairs.len() + i, total);
                worker.draw_negatives(&mut rng, &pool, t, config.neg_k);
                loss_sum += worker.step(&matrix, h, t, lr).ok_or_else(|| diverged(epoch + 1))?;
            }
            epoch_losses.push(loss_sum / pairs.len() as f64);
        }
    } else {
        let step_counter = AtomicUsize::new(0);
        let failed = AtomicBool::new(false);
        let workers = rayon::current_num_threads().max(1);
        let chunk = pairs.len().div_ceil(workers);
        for epoch in 0..config.epochs {
            order.shuffle(&mut rng);
            let loss_sum: f64 = order
                .par_chunks(chunk)
                .enumerate()
                .map(|(ci, idxs)| {
                    let mut wrng = seed::derived_rng(
                        config.seed,
                        TAG_WORKER,
                        (epoch as u64) << 32 | ci as u64,
                    );
                    let mut worker = Worker::new(dim, config.neg_k);
                    let mut sum = 0.0;
                    for &idx in idxs {
                        if failed.load(Ordering::Relaxed) {
                            break;
                        }
                        let (h, t) = pairs[idx];
                        let lr = config.learning_rate(step_counter.fetch_add(1, Ordering::Relaxed), total);
                        worker.draw_negatives(&mut wrng, &pool, t, config.neg_k);
                        match worker.step(&matrix, h, t, lr) {
                            Some(l) => sum += l,
                            None => failed.store(true, Ordering::Relaxed),
                        }
                    }
                    sum
                })
                .sum();
            if failed.load(Ordering::Relaxed) {
                return Err(diverged(epoch + 1));
            }
            epoch_losses.push(loss_sum / pairs.len() as f64);
        }
    }

    let vectors = matrix.into_vec();
    if vectors.iter().any(|v| !v.is_finite()) {
        return Err(diverged(config.epochs));
    }
    let mut space = EmbeddingSpace::from_rows(dim, vectors, EntityMap::identity(n_entities), config.clone())?;
    space.epoch_losses = epoch_losses;
    Ok(space)
}

/// Trains on triples with arbitrary (global) entity ids: only entities that
/// occur in `triples` get a row, and they also form the negative pool.
pub fn train_on_stream(triples: &[Triple], config: &EmbeddingConfig) -> Result<EmbeddingSpace> {
    let map = EntityMap::from_triples(triples);
    if map.len() < 2 {
        return Err(Error::param(format!(
            "training stream covers {} entit{}; need at least 2",
            map.len(),
            if map.len() == 1 { "y" } else { "ies" }
        )));
    }
    let local: Vec<Triple> = triples
        .iter()
        .map(|t| map.localize(t).expect("map built from these triples"))
        .collect();
    let pool: Vec<EntityId> = (0..map.len() as u32).map(EntityId).collect();
    train_embeddings(&local, map.len(), config, &pool)?.with_entity_map(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::{init_embeddings, score};
    use crate::graph::RelationId;

    fn t(h: u32, tl: u32) -> Triple {
        Triple::new(EntityId(h), RelationId(0), EntityId(tl))
    }

    fn pool(n: u32) -> Vec<EntityId> {
        (0..n).map(EntityId).collect()
    }

    fn two_cliques() -> Vec<Triple> {
        // a=0, b=1, c=2, d=3
        vec![t(0, 1), t(2, 3)]
    }

    fn toy_config(seed: u64) -> EmbeddingConfig {
        EmbeddingConfig {
            dim: 8,
            epochs: 50,
            seed,
            ..EmbeddingConfig::default()
        }
    }

    #[test]
    fn objective_at_zero_vectors() {
        let v = vec![0.0; 3 * 2];
        let (loss, grad) = sgns_objective(&v, 2, 0, 1, &[2, 2]);
        assert!((loss - 3.0 * std::f64::consts::LN_2).abs() < 1e-15);
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn step_matches_update_rule() {
        let dim = 3;
        let v = vec![0.1, -0.2, 0.3, 0.05, 0.4, -0.1, -0.3, 0.2, 0.25];
        let (h, tl, n) = (0, 1, 2);
        let lr = 0.1;
        let m = SharedMatrix::new(v.clone(), dim);
        let mut w = Worker::new(dim, 1);
        w.neg_rows = vec![n];
        w.step(&m, h, tl, lr).unwrap();
        let after = m.into_vec();

        let r = |i: usize| &v[i * dim..(i + 1) * dim];
        let sp = sigmoid(dot(r(h), r(tl)));
        let sn = sigmoid(dot(r(h), r(n)));
        for k in 0..dim {
            let vh = r(h)[k] + lr * ((1.0 - sp) * r(tl)[k] - sn * r(n)[k]);
            let vt = r(tl)[k] + lr * (1.0 - sp) * r(h)[k];
            let vn = r(n)[k] - lr * sn * r(h)[k];
            assert!((after[h * dim + k] - vh).abs() < 1e-15);
            assert!((after[tl * dim + k] - vt).abs() < 1e-15);
            assert!((after[n * dim + k] - vn).abs() < 1e-15);
        }
    }

    #[test]
    fn init_matches_init_embeddings() {
        let cfg = EmbeddingConfig {
            dim: 4,
            epochs: 1,
            lr0: 1e-300,
            seed: 17,
            ..EmbeddingConfig::default()
        };
        let init = init_embeddings(4, &cfg).unwrap();
        let trained = train_embeddings(&two_cliques(), 4, &cfg, &pool(4)).unwrap();
        for (a, b) in init.as_slice().iter().zip(trained.as_slice()) {
            assert!((a - b).abs() < 1e-200);
        }
    }

    #[test]
    fn empty_stream_rejected() {
        let err = train_embeddings(&[], 4, &toy_config(0), &pool(4)).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)));
    }

    #[test]
    fn bad_pool_rejected() {
        assert!(train_embeddings(&two_cliques(), 4, &toy_config(0), &[EntityId(1), EntityId(1)]).is_err());
        assert!(train_embeddings(&two_cliques(), 4, &toy_config(0), &[EntityId(1), EntityId(9)]).is_err());
        assert!(train_embeddings(&[t(0, 7)], 4, &toy_config(0), &pool(4)).is_err());
    }

    #[test]
    fn deterministic_training_is_bit_identical() {
        let a = train_embeddings(&two_cliques(), 4, &toy_config(5), &pool(4)).unwrap();
        let b = train_embeddings(&two_cliques(), 4, &toy_config(5), &pool(4)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.epoch_losses().len(), 50);
    }

    #[test]
    fn two_cliques_separate() {
        let mut ok = 0;
        for seed in 0..100 {
            let s = train_embeddings(&two_cliques(), 4, &toy_config(seed), &pool(4)).unwrap();
            let sc = |a, b| score(&s, EntityId(a), EntityId(b)).unwrap();
            if sc(0, 1) > sc(0, 2) && sc(2, 3) > sc(2, 1) {
                ok += 1;
            }
        }
        assert!(ok >= 95, "{ok}/100 seeds separated the cliques");
    }

    #[test]
    fn loss_decreases_on_two_cliques() {
        let mut ok = 0;
        for seed in 0..100 {
            let s = train_embeddings(&two_cliques(), 4, &toy_config(seed), &pool(4)).unwrap();
            let l = s.epoch_losses();
            if l[49] < l[0] {
                ok += 1;
            }
        }
        assert!(ok >= 95, "{ok}/100 seeds reduced the loss");
    }

    #[test]
    fn divergence_is_reported() {
        let cfg = EmbeddingConfig {
            dim: 4,
            epochs: 200,
            lr0: 1e200,
            seed: 1,
            ..EmbeddingConfig::default()
        };
        let err = train_embeddings(&two_cliques(), 4, &cfg, &pool(4)).unwrap_err();
        assert!(matches!(err, Error::EmbeddingDiverged { .. }), "{err}");
        assert!(err.to_string().contains("lower lr0"));
    }

    #[test]
    fn parallel_training_is_finite_and_shaped() {
        let triples: Vec<Triple> = (0..60).map(|i| t(i % 20, (i * 7 + 3) % 20)).filter(|x| x.head != x.tail).collect();
        let cfg = EmbeddingConfig {
            dim: 6,
            epochs: 20,
            deterministic: false,
            ..EmbeddingConfig::default()
        };
        let pool_ = pool(20);
        let s = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| train_embeddings(&triples, 20, &cfg, &pool_))
            .unwrap();
        assert_eq!(s.n_rows(), 20);
        assert_eq!(s.as_slice().len(), 120);
        assert!(s.is_finite());
        assert_eq!(s.epoch_losses().len(), 20);
    }

    #[test]
    fn stream_training_maps_global_ids() {
        let triples = vec![t(10, 20), t(20, 30), t(30, 10)];
        let s = train_on_stream(&triples, &toy_config(1)).unwrap();
        assert_eq!(s.n_rows(), 3);
        assert!(s.contains(EntityId(20)));
        assert!(!s.contains(EntityId(0)));
        assert!(train_on_stream(&[t(4, 4)], &toy_config(1)).is_err());
    }
}
