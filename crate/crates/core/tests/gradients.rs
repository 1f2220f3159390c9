mod common;

use kgbench::embed::{sgns_objective, train_embeddings, EmbeddingConfig};
use kgbench::featclass::{logistic_objective, train_classifier_traced, ClassifierParams};
use kgbench::graph::{EntityId, RelationId, Triple};
use proptest::prelude::*;

use common::max_rel_err;

fn numeric_grad(x: &[f64], step: f64, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            p[i] = x[i] + step;
            let up = f(&p);
            p[i] = x[i] - step;
            let down = f(&p);
            p[i] = x[i];
            (up - down) / (2.0 * step)
        })
        .collect()
}

fn embedding_instance() -> impl Strategy<Value = (usize, usize, Vec<f64>, usize, usize, Vec<usize>)> {
    (1usize..=4, 2usize..=5, 1usize..=2).prop_flat_map(|(dim, rows, k)| {
        (
            Just(dim),
            Just(rows),
            prop::collection::vec(-1.0f64..1.0, rows * dim),
            0..rows,
            0..rows,
            prop::collection::vec(0..rows, k),
        )
    })
}

fn classifier_instance() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<bool>, Vec<f64>, f64, f64)> {
    (1usize..=10, 1usize..=5).prop_flat_map(|(n, m)| {
        (
            prop::collection::vec(prop::collection::vec(-2.0f64..2.0, m), n),
            prop::collection::vec(any::<bool>(), n),
            prop::collection::vec(-1.0f64..1.0, m),
            -1.0f64..1.0,
            0.0f64..0.1,
        )
    })
}

proptest! {
    #[test]
    fn embedding_gradient_matches_finite_differences((dim, _rows, v, h, t, negs) in embedding_instance()) {
        let (_, grad) = sgns_objective(&v, dim, h, t, &negs);
        let numeric = numeric_grad(&v, 1e-5, |p| sgns_objective(p, dim, h, t, &negs).0);
        prop_assert!(max_rel_err(&grad, &numeric) < 1e-4);
    }

    #[test]
    fn classifier_gradient_matches_finite_differences((x, y, w, b, l2) in classifier_instance()) {
        let (_, gw, gb) = logistic_objective(&w, b, &x, &y, l2);
        let mut theta = w.clone();
        theta.push(b);
        let m = w.len();
        let numeric = numeric_grad(&theta, 1e-6, |p| logistic_objective(&p[..m], p[m], &x, &y, l2).0);
        let mut analytic = gw;
        analytic.push(gb);
        prop_assert!(max_rel_err(&analytic, &numeric) < 1e-5);
    }
}

#[test]
fn untouched_rows_get_no_gradient() {
    let v: Vec<f64> = (0..12).map(|i| (i as f64 * 0.37).sin()).collect();
    let (_, g) = sgns_objective(&v, 3, 0, 1, &[2]);
    assert!(g[9..].iter().all(|&x| x == 0.0));
}

#[test]
fn classifier_loss_never_increases_at_small_lr() {
    let x: Vec<Vec<f64>> = (0..40).map(|i| vec![(i as f64 * 0.7).sin(), (i as f64 * 1.3).cos()]).collect();
    let y: Vec<bool> = x.iter().map(|r| r[0] + 0.3 * r[1] > 0.1).collect();
    let params = ClassifierParams {
        lr: 0.01,
        epochs: 300,
        l2_reg: 1e-3,
    };
    let mut losses = Vec::new();
    train_classifier_traced(&x, &y, &params, 0, |_, loss| losses.push(loss)).unwrap();
    assert_eq!(losses.len(), 300);
    assert!(losses.windows(2).all(|w| w[1] <= w[0] + 1e-12));
}

#[test]
fn embedding_loss_falls_on_a_ring() {
    let ring: Vec<Triple> = (0..30u32)
        .map(|i| Triple::new(EntityId(i), RelationId(0), EntityId((i + 1) % 30)))
        .collect();
    let pool: Vec<EntityId> = (0..30).map(EntityId).collect();
    let cfg = EmbeddingConfig {
        dim: 8,
        epochs: 40,
        seed: 5,
        ..EmbeddingConfig::default()
    };
    let space = train_embeddings(&ring, 30, &cfg, &pool).unwrap();
    let losses = space.epoch_losses();
    assert_eq!(losses.len(), 40);
    assert!(losses[39] < losses[0]);
}
