mod common;

use std::collections::HashSet;

use kgbench::bench::{
    learning_curve_on_split, run_global, run_local, run_on_split, training_points, LimitScope, NoObserver,
};
use kgbench::graph::{relation_subgraph, KnowledgeGraph, Triple};
use kgbench::metrics::Mode;
use kgbench::split::{build_split, SplitParams};
use kgbench::Error;

use common::{quick_config, random_graph, Recorder};

fn ring(rel: &str, prefix: &str, n: usize) -> Vec<(String, String, String)> {
    (0..n)
        .flat_map(|i| {
            [1, 2].map(|step| (format!("{prefix}{i}"), rel.to_owned(), format!("{prefix}{}", (i + step) % n)))
        })
        .collect()
}

fn graph_of(edges: &[(String, String, String)]) -> KnowledgeGraph {
    KnowledgeGraph::from_labeled(edges.iter().map(|(h, r, t)| (h.as_str(), r.as_str(), t.as_str()))).0
}

#[test]
fn single_relation_gives_one_entry_and_micro_equals_macro() {
    let g = graph_of(&ring("likes", "p", 30));
    let report = run_global(&g, &quick_config(1)).unwrap();
    assert_eq!(report.per_relation.len(), 1);
    assert_eq!(report.micro_f1.to_bits(), report.macro_f1.to_bits());
    assert_eq!(report.mode, Mode::Global);
}

#[test]
fn deterministic_runs_are_bit_identical() {
    let g = random_graph(2, 40, 2, 200);
    let cfg = quick_config(3);
    assert_eq!(run_global(&g, &cfg).unwrap(), run_global(&g, &cfg).unwrap());
    assert_eq!(run_local(&g, &cfg).unwrap(), run_local(&g, &cfg).unwrap());
}

#[test]
fn global_and_local_see_the_same_test_triples() {
    let g = graph_of(&ring("likes", "p", 30));
    let cfg = quick_config(4);
    let split = build_split(&g, &cfg.split, cfg.seed).unwrap();
    let mut rec = Recorder::default();
    let global = run_on_split(&g, &split, &cfg, Mode::Global, &mut rec).unwrap();
    let local = run_on_split(&g, &split, &cfg, Mode::Local, &mut rec).unwrap();
    assert_eq!(rec.test_sets(Mode::Global), rec.test_sets(Mode::Local));
    assert_eq!(global.per_relation.len(), 1);
    assert_eq!(local.per_relation.len(), 1);
}

#[test]
fn local_skips_relation_with_one_training_edge() {
    let mut edges = ring("big", "p", 20);
    edges.push(("p0".into(), "tiny".into(), "p5".into()));
    edges.push(("p3".into(), "tiny".into(), "p9".into()));
    let g = graph_of(&edges);
    let mut cfg = quick_config(5);
    cfg.split = SplitParams {
        test_fraction: 0.5,
        ..SplitParams::default()
    };
    let split = build_split(&g, &cfg.split, cfg.seed).unwrap();
    let tiny = g.relation_id("tiny").unwrap();
    assert_eq!(split.relation(tiny).train_pos.len(), 1);

    let local = run_on_split(&g, &split, &cfg, Mode::Local, &mut NoObserver).unwrap();
    assert!(local.relation("tiny").is_none());
    assert!(local.skipped.iter().any(|s| s.relation == "tiny"));
    assert!(local.warnings.iter().any(|w| w.contains("tiny")));
    assert!(local.relation("big").is_some());
}

#[test]
fn local_spaces_cover_exactly_their_subgraph() {
    let mut edges = ring("a", "x", 25);
    edges.extend(ring("b", "y", 15));
    let g = graph_of(&edges);
    let cfg = quick_config(6);
    let split = build_split(&g, &cfg.split, cfg.seed).unwrap();
    let local = run_on_split(&g, &split, &cfg, Mode::Local, &mut NoObserver).unwrap();
    assert_eq!(local.per_relation.len(), 2);
    for rep in &local.per_relation {
        let r = g.relation_id(&rep.relation).unwrap();
        let train = g.with_triples(&split.relation(r).train_pos).unwrap();
        let sub = relation_subgraph(&train, r).unwrap();
        assert_eq!(rep.embedding_rows, sub.graph.n_entities(), "{}", rep.relation);
    }
    let global = run_on_split(&g, &split, &cfg, Mode::Global, &mut NoObserver).unwrap();
    let rows: HashSet<usize> = global.per_relation.iter().map(|r| r.embedding_rows).collect();
    assert_eq!(rows.len(), 1);
}

#[test]
fn full_fraction_curve_matches_plain_run() {
    let g = random_graph(7, 50, 2, 250);
    let cfg = quick_config(7);
    let split = build_split(&g, &cfg.split, cfg.seed).unwrap();
    let plain = run_on_split(&g, &split, &cfg, Mode::Global, &mut NoObserver).unwrap();
    let curve = learning_curve_on_split(&g, &split, &cfg, Mode::Global, &mut NoObserver).unwrap();
    assert_eq!(curve.len(), 1);
    assert_eq!(curve[0].1, plain);
}

#[test]
fn curve_points_are_nested_and_share_test_sets() {
    let g = random_graph(8, 60, 3, 400);
    let mut cfg = quick_config(8);
    cfg.fractions = vec![0.2, 0.6, 1.0];
    let split = build_split(&g, &cfg.split, cfg.seed).unwrap();
    let points = training_points(&g, &split, &cfg.fractions).unwrap();
    let test_neg: HashSet<Triple> = split.relations.iter().flat_map(|r| r.test_neg.iter().copied()).collect();
    for w in points.windows(2) {
        for (a, b) in w[0].train_pos.iter().zip(&w[1].train_pos) {
            let b: HashSet<_> = b.iter().collect();
            assert!(a.iter().all(|t| b.contains(t)));
        }
    }
    for p in &points {
        for (rs, neg) in split.relations.iter().zip(&p.train_neg) {
            let n = p.train_pos[rs.relation.index()].len();
            assert_eq!(n, kgbench::split::scaled_count(p.fraction, rs.train_pos.len()));
            assert!(neg.iter().all(|t| !test_neg.contains(t) && !g.contains(t)));
        }
    }

    for scope in [LimitScope::ClassifierOnly, LimitScope::EmbeddingsAndClassifier] {
        cfg.limit_scope = scope;
        let mut rec = Recorder::default();
        let curve = learning_curve_on_split(&g, &split, &cfg, Mode::Global, &mut rec).unwrap();
        assert_eq!(curve.iter().map(|(f, _)| *f).collect::<Vec<_>>(), cfg.fractions);
        let per_point = rec.test.len() / curve.len();
        let first = &rec.test[..per_point];
        assert!(rec.test.chunks(per_point).all(|c| c == first));
        let streams = match scope {
            LimitScope::ClassifierOnly => 1,
            LimitScope::EmbeddingsAndClassifier => 3,
        };
        assert_eq!(rec.embedding.len(), streams);
        if scope == LimitScope::EmbeddingsAndClassifier {
            for ((_, _, stream), p) in rec.embedding.iter().zip(&points) {
                let want: Vec<Triple> = p.train_pos.iter().flatten().copied().collect();
                assert_eq!(stream, &want);
            }
        }
    }
}

#[test]
fn unfiltered_collision_with_test_positive_aborts() {
    let g = random_graph(9, 6, 1, 40);
    let mut cfg = quick_config(0);
    cfg.split.filtered = false;
    cfg.split.neg_ratio_train = 1.0;
    let mut tripped = false;
    for seed in 0..200 {
        cfg.seed = seed;
        let split = build_split(&g, &cfg.split, seed).unwrap();
        let test: HashSet<_> = split.test_positives().collect();
        if !split.relations[0].train_neg.iter().any(|t| test.contains(t)) {
            continue;
        }
        let err = run_on_split(&g, &split, &cfg, Mode::Global, &mut NoObserver).unwrap_err();
        assert!(matches!(err, Error::Leakage { .. }), "{err}");
        tripped = true;
        break;
    }
    assert!(tripped, "no seed produced a colliding negative");
}
