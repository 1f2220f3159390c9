#![allow(dead_code)]

use std::collections::HashSet;

use kgbench::bench::{BenchConfig, BenchObserver};
use kgbench::embed::EmbeddingConfig;
use kgbench::graph::{KnowledgeGraph, RelationId, Triple};
use kgbench::metrics::Mode;
use kgbench::synth::PlantedPartition;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random labelled graph: `n_entities` nodes, `n_relations` relations, up to
/// `max_triples` edges (duplicates and self-loops are left for the loader).
pub fn random_graph(seed: u64, n_entities: usize, n_relations: usize, max_triples: usize) -> KnowledgeGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<(String, String, String)> = (0..max_triples)
        .map(|_| {
            (
                format!("e{}", rng.random_range(0..n_entities)),
                format!("r{}", rng.random_range(0..n_relations)),
                format!("e{}", rng.random_range(0..n_entities)),
            )
        })
        .collect();
    KnowledgeGraph::from_labeled(labels.iter().map(|(h, r, t)| (h.as_str(), r.as_str(), t.as_str()))).0
}

pub fn planted(seed: u64) -> KnowledgeGraph {
    PlantedPartition {
        blocks: 2,
        nodes_per_block: 100,
        p_in: 0.1,
        p_out: 0.01,
        seed,
    }
    .graph()
    .unwrap()
    .0
}

/// Small, fast configuration for protocol tests.
pub fn quick_config(seed: u64) -> BenchConfig {
    BenchConfig {
        embedding: EmbeddingConfig {
            dim: 8,
            epochs: 5,
            ..EmbeddingConfig::default()
        },
        seed,
        ..BenchConfig::default()
    }
}

/// Records everything the bench hands to each training stage.
#[derive(Default)]
pub struct Recorder {
    pub embedding: Vec<(Mode, Option<RelationId>, Vec<Triple>)>,
    pub classifier: Vec<(Mode, RelationId, Vec<Triple>, Vec<Triple>)>,
    pub test: Vec<(Mode, RelationId, Vec<Triple>, Vec<Triple>)>,
}

impl BenchObserver for Recorder {
    fn embedding_stream(&mut self, mode: Mode, scope: Option<RelationId>, triples: &[Triple]) {
        self.embedding.push((mode, scope, triples.to_vec()));
    }

    fn classifier_set(&mut self, mode: Mode, relation: RelationId, pos: &[Triple], neg: &[Triple]) {
        self.classifier.push((mode, relation, pos.to_vec(), neg.to_vec()));
    }

    fn test_set(&mut self, mode: Mode, relation: RelationId, pos: &[Triple], neg: &[Triple]) {
        self.test.push((mode, relation, pos.to_vec(), neg.to_vec()));
    }
}

impl Recorder {
    /// Every triple any training stage saw.
    pub fn trained_on(&self) -> HashSet<Triple> {
        let mut seen = HashSet::new();
        for (_, _, t) in &self.embedding {
            seen.extend(t.iter().copied());
        }
        for (_, _, p, n) in &self.classifier {
            seen.extend(p.iter().chain(n).copied());
        }
        seen
    }

    pub fn test_sets(&self, mode: Mode) -> Vec<(RelationId, HashSet<Triple>, HashSet<Triple>)> {
        self.test
            .iter()
            .filter(|(m, ..)| *m == mode)
            .map(|(_, r, p, n)| (*r, p.iter().copied().collect(), n.iter().copied().collect()))
            .collect()
    }
}

/// Brute-force metric oracle, written from the textbook definitions.
pub mod oracle {
    pub fn counts(pred: &[bool], label: &[bool]) -> [u64; 4] {
        let mut c = [0u64; 4];
        for i in 0..pred.len() {
            let k = match (pred[i], label[i]) {
                (true, true) => 0,
                (true, false) => 1,
                (false, false) => 2,
                (false, true) => 3,
            };
            c[k] += 1;
        }
        c
    }

    fn ratio(num: u64, den: u64) -> f64 {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    }

    /// `(precision, recall, f1)` from `[tp, fp, tn, fn]`.
    pub fn prf1(c: [u64; 4]) -> (f64, f64, f64) {
        let p = ratio(c[0], c[0] + c[1]);
        let r = ratio(c[0], c[0] + c[3]);
        let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        (p, r, f)
    }
}

/// Worst coordinate-wise relative error between two gradients.
pub fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| {
            let scale = a.abs().max(n.abs());
            if scale == 0.0 {
                0.0
            } else {
                (a - n).abs() / scale.max(1e-8)
            }
        })
        .fold(0.0, f64::max)
}
