//! Benchmark protocol: one shared split, embeddings trained globally or per
//! relation, one logistic classifier per relation, and learning curves over
//! training-data fractions.
//!
//! Seeds: the split uses the top-level seed directly (see [`crate::split`]).
//! The global embedding is seeded with `derive_seed(seed, "embed", 0)`, the
//! local embedding of relation `r` with `derive_seed(seed, "embed", r + 1)`.
//! Learning-curve subsamples use `derive_seed(seed, "curve", r)` and their
//! resampled negatives `derive_seed(seed, "curve-neg", point << 32 | r)`.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embed::{train_embeddings, EmbeddingConfig, EmbeddingSpace};
use crate::error::{Error, Result};
use crate::featclass::{edge_features, train_classifier, ClassifierParams, EdgeOperator};
use crate::graph::{relation_subgraph, EntityId, KnowledgeGraph, RelationId, Triple};
use crate::metrics::{
    aggregate, confusion, has_zero_denominator, prf1, ConfusionCounts, EvalReport, Mode,
    RelationReport, SkippedRelation,
};
use crate::seed::{self, derive_seed};
use crate::split::{build_split, sample_negatives, scaled_count, DataSplit, SplitParams};

/// Local mode skips relations with fewer training edges than this.
pub const MIN_LOCAL_TRAIN_EDGES: usize = 2;

const TAG_CLASSIFIER: &str = "classifier";
const TAG_LABEL_CONTROL: &str = "label-control";

/// How classifier training labels are presented.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Labels {
    True,
    /// Labels randomly permuted across the training rows: a negative control
    /// whose F1 should sit near chance.
    Permuted,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitScope {
    /// Embeddings always see the full training split; only the classifier
    /// gets the reduced data.
    #[default]
    ClassifierOnly,
    /// Embeddings are retrained on each subsample as well.
    EmbeddingsAndClassifier,
}

/// Entity vocabulary used by local embeddings.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LocalVocabulary {
    /// Only entities incident to the relation's training edges get a vector.
    #[default]
    RelationSubgraph,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub mode: Mode,
    pub embedding: EmbeddingConfig,
    pub operator: EdgeOperator,
    pub classifier: ClassifierParams,
    pub split: SplitParams,
    pub fractions: Vec<f64>,
    pub seed: u64,
    pub limit_scope: LimitScope,
    pub local_vocabulary: LocalVocabulary,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            mode: Mode::Global,
            embedding: EmbeddingConfig::default(),
            operator: EdgeOperator::default(),
            classifier: ClassifierParams::default(),
            split: SplitParams::default(),
            fractions: vec![1.0],
            seed: 0,
            limit_scope: LimitScope::default(),
            local_vocabulary: LocalVocabulary::default(),
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        self.embedding.validate()?;
        self.classifier.validate()?;
        self.split.validate()?;
        validate_fractions(&self.fractions)
    }
}

pub fn validate_fractions(fractions: &[f64]) -> Result<()> {
    if fractions.is_empty() {
        return Err(Error::param("fractions must not be empty"));
    }
    if let Some(f) = fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
        return Err(Error::param(format!("fraction {f} outside (0, 1]")));
    }
    if fractions.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param("fractions must be strictly ascending"));
    }
    Ok(())
}

/// Hooks into the triples each training stage receives. Calls happen on the
/// calling thread, in relation order.
pub trait BenchObserver {
    /// Triples fed to embedding training; `scope` is `None` for the global
    /// space.
    fn embedding_stream(&mut self, _mode: Mode, _scope: Option<RelationId>, _triples: &[Triple]) {}

    /// Positive and negative triples the classifier of `relation` is trained
    /// on (before OOV dropping).
    fn classifier_set(&mut self, _mode: Mode, _relation: RelationId, _pos: &[Triple], _neg: &[Triple]) {}

    /// Test triples of `relation` before OOV dropping.
    fn test_set(&mut self, _mode: Mode, _relation: RelationId, _pos: &[Triple], _neg: &[Triple]) {}
}

pub struct NoObserver;

impl BenchObserver for NoObserver {}

/// Training data for one learning-curve point.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingPoint {
    pub fraction: f64,
    /// Indexed by relation id.
    pub train_pos: Vec<Vec<Triple>>,
    pub train_neg: Vec<Vec<Triple>>,
}

impl TrainingPoint {
    pub fn full(split: &DataSplit) -> Self {
        TrainingPoint {
            fraction: 1.0,
            train_pos: split.relations.iter().map(|r| r.train_pos.clone()).collect(),
            train_neg: split.relations.iter().map(|r| r.train_neg.clone()).collect(),
        }
    }

    fn is_empty(&self) -> bool {
        self.train_pos.iter().all(Vec::is_empty)
    }
}

/// Nested per-relation subsamples of the training positives, one point per
/// fraction. A relation whose subsample is its whole training set keeps its
/// original positives and negatives; otherwise negatives are resampled at
/// the split's train ratio, disjoint from the test negatives.
pub fn training_points(g: &KnowledgeGraph, split: &DataSplit, fractions: &[f64]) -> Result<Vec<TrainingPoint>> {
    validate_fractions(fractions)?;
    let orders: Vec<Vec<Triple>> = split
        .relations
        .iter()
        .map(|rs| {
            let mut order = rs.train_pos.clone();
            order.shuffle(&mut seed::derived_rng(split.seed, seed::TAG_CURVE, rs.relation.0 as u64));
            order
        })
        .collect();

    fractions
        .iter()
        .enumerate()
        .map(|(pi, &fraction)| {
            let per_rel: Vec<(Vec<Triple>, Vec<Triple>)> = split
                .relations
                .par_iter()
                .zip(&orders)
                .map(|(rs, order)| {
                    let k = scaled_count(fraction, order.len());
                    if k == order.len() {
                        return Ok((rs.train_pos.clone(), rs.train_neg.clone()));
                    }
                    let pos = order[..k].to_vec();
                    let forbid: HashSet<Triple> = rs.test_neg.iter().copied().collect();
                    let neg = sample_negatives(
                        g,
                        &pos,
                        split.params.neg_ratio_train,
                        split.params.strategy,
                        split.params.filtered,
                        &forbid,
                        derive_seed(split.seed, seed::TAG_CURVE_NEG, (pi as u64) << 32 | rs.relation.0 as u64),
                    )?;
                    Ok((pos, neg))
                })
                .collect::<Result<_>>()?;
            let (train_pos, train_neg) = per_rel.into_iter().unzip();
            Ok(TrainingPoint {
                fraction,
                train_pos,
                train_neg,
            })
        })
        .collect()
}

fn leakage_check(
    stage: &'static str,
    g: &KnowledgeGraph,
    relation: Option<RelationId>,
    test_pos: &HashSet<Triple>,
    triples: &[Triple],
) -> Result<()> {
    let count = triples.iter().filter(|t| test_pos.contains(t)).count();
    if count > 0 {
        return Err(Error::Leakage {
            stage,
            relation: relation.map_or("<all>".to_owned(), |r| g.relation_label(r).to_owned()),
            count,
        });
    }
    Ok(())
}

fn embedding_config(cfg: &BenchConfig, scope: u64) -> EmbeddingConfig {
    EmbeddingConfig {
        seed: derive_seed(cfg.seed, seed::TAG_EMBED, scope),
        ..cfg.embedding.clone()
    }
}

/// Embedding spaces for one evaluation: a single global space, or one
/// optional space per relation.
enum Spaces {
    Global(EmbeddingSpace),
    Local(Vec<std::result::Result<EmbeddingSpace, String>>),
}

impl Spaces {
    fn for_relation(&self, r: RelationId) -> std::result::Result<&EmbeddingSpace, &str> {
        match self {
            Spaces::Global(s) => Ok(s),
            Spaces::Local(v) => v[r.index()].as_ref().map_err(String::as_str),
        }
    }
}

fn train_spaces(
    g: &KnowledgeGraph,
    split: &DataSplit,
    point: &TrainingPoint,
    cfg: &BenchConfig,
    mode: Mode,
    test_pos: &HashSet<Triple>,
    observer: &mut dyn BenchObserver,
) -> Result<Spaces> {
    match mode {
        Mode::Global => {
            let stream: Vec<Triple> = point.train_pos.iter().flatten().copied().collect();
            leakage_check("embedding training", g, None, test_pos, &stream)?;
            observer.embedding_stream(mode, None, &stream);
            let space = crate::embed::train_on_stream(&stream, &embedding_config(cfg, 0))?;
            Ok(Spaces::Global(space))
        }
        Mode::Local => {
            for rs in &split.relations {
                let stream = &point.train_pos[rs.relation.index()];
                leakage_check("embedding training", g, Some(rs.relation), test_pos, stream)?;
                if rs.is_evaluable() {
                    observer.embedding_stream(mode, Some(rs.relation), stream);
                }
            }
            let spaces = split
                .relations
                .par_iter()
                .map(|rs| {
                    if !rs.is_evaluable() {
                        return Ok(Err("no test edges".to_owned()));
                    }
                    let r = rs.relation;
                    let stream = &point.train_pos[r.index()];
                    if stream.len() < MIN_LOCAL_TRAIN_EDGES {
                        return Ok(Err(format!(
                            "{} training edge(s); local embedding needs at least {}",
                            stream.len(),
                            MIN_LOCAL_TRAIN_EDGES
                        )));
                    }
                    let sub = relation_subgraph(&g.with_triples(stream)?, r)?;
                    let n = sub.graph.n_entities();
                    if n < 2 {
                        return Ok(Err(format!("training subgraph has {n} entit(ies)")));
                    }
                    let pool: Vec<EntityId> = (0..n as u32).map(EntityId).collect();
                    let space = train_embeddings(
                        sub.graph.triples(),
                        n,
                        &embedding_config(cfg, r.0 as u64 + 1),
                        &pool,
                    )?
                    .with_entity_map(sub.entity_map)?;
                    Ok(Ok(space))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Spaces::Local(spaces))
        }
    }
}

/// Featurises `triples`, dropping any whose endpoints have no vector.
fn featurize(space: &EmbeddingSpace, op: EdgeOperator, triples: &[Triple]) -> Result<(Vec<Vec<f64>>, usize)> {
    let mut out = Vec::with_capacity(triples.len());
    let mut dropped = 0;
    for t in triples {
        if space.contains(t.head) && space.contains(t.tail) {
            out.push(edge_features(space, t.head, t.tail, op)?);
        } else {
            dropped += 1;
        }
    }
    Ok((out, dropped))
}

enum RelationOutcome {
    Evaluated(RelationReport),
    Skipped(String),
}

fn evaluate_relation(
    g: &KnowledgeGraph,
    split: &DataSplit,
    point: &TrainingPoint,
    cfg: &BenchConfig,
    space: &EmbeddingSpace,
    r: RelationId,
    label_mode: Labels,
) -> Result<RelationOutcome> {
    let rs = split.relation(r);
    let (pos_x, pos_drop) = featurize(space, cfg.operator, &point.train_pos[r.index()])?;
    let (neg_x, neg_drop) = featurize(space, cfg.operator, &point.train_neg[r.index()])?;
    if pos_x.is_empty() || neg_x.is_empty() {
        return Ok(RelationOutcome::Skipped(format!(
            "classifier training set has {} positive(s) and {} negative(s) after OOV dropping",
            pos_x.len(),
            neg_x.len()
        )));
    }
    let (n_train_pos, n_train_neg) = (pos_x.len(), neg_x.len());
    let mut labels = vec![true; n_train_pos];
    labels.resize(n_train_pos + n_train_neg, false);
    if label_mode == Labels::Permuted {
        labels.shuffle(&mut seed::derived_rng(cfg.seed, TAG_LABEL_CONTROL, r.0 as u64));
    }
    let mut features = pos_x;
    features.extend(neg_x);
    let clf = train_classifier(
        &features,
        &labels,
        &cfg.classifier,
        derive_seed(cfg.seed, TAG_CLASSIFIER, r.0 as u64),
    )?
    .with_operator(cfg.operator);

    let (test_pos_x, tp_drop) = featurize(space, cfg.operator, &rs.test_pos)?;
    let (test_neg_x, tn_drop) = featurize(space, cfg.operator, &rs.test_neg)?;
    let mut predictions = Vec::with_capacity(test_pos_x.len() + test_neg_x.len());
    for x in test_pos_x.iter().chain(&test_neg_x) {
        predictions.push(clf.predict_label(x)?);
    }
    let mut truth = vec![true; test_pos_x.len()];
    truth.resize(predictions.len(), false);
    let counts = if predictions.is_empty() {
        ConfusionCounts::default()
    } else {
        confusion(&predictions, &truth)?
    };
    let m = prf1(&counts);

    Ok(RelationOutcome::Evaluated(RelationReport {
        relation: g.relation_label(r).to_owned(),
        relation_index: r.0,
        counts,
        precision: m.precision,
        recall: m.recall,
        f1: m.f1,
        n_test_pos: test_pos_x.len(),
        n_test_neg: test_neg_x.len(),
        n_dropped_oov: tp_drop + tn_drop,
        n_train_pos,
        n_train_neg,
        n_train_dropped_oov: pos_drop + neg_drop,
        embedding_rows: space.n_rows(),
        zero_denominator: has_zero_denominator(&counts),
    }))
}

#[allow(clippy::too_many_arguments)]
fn evaluate_point(
    g: &KnowledgeGraph,
    split: &DataSplit,
    point: &TrainingPoint,
    spaces: &Spaces,
    cfg: &BenchConfig,
    mode: Mode,
    test_pos: &HashSet<Triple>,
    label_mode: Labels,
    observer: &mut dyn BenchObserver,
) -> Result<EvalReport> {
    let mut skipped = Vec::new();
    let skip = |r: RelationId, reason: String| SkippedRelation {
        relation: g.relation_label(r).to_owned(),
        relation_index: r.0,
        reason,
    };

    let mut jobs = Vec::new();
    for rs in &split.relations {
        let r = rs.relation;
        if !rs.is_evaluable() {
            skipped.push(skip(r, "no test edges".to_owned()));
            continue;
        }
        if let Err(reason) = spaces.for_relation(r) {
            skipped.push(skip(r, reason.to_owned()));
            continue;
        }
        let (pos, neg) = (&point.train_pos[r.index()], &point.train_neg[r.index()]);
        leakage_check("classifier training", g, Some(r), test_pos, pos)?;
        leakage_check("classifier training", g, Some(r), test_pos, neg)?;
        observer.classifier_set(mode, r, pos, neg);
        observer.test_set(mode, r, &rs.test_pos, &rs.test_neg);
        jobs.push(r);
    }

    let outcomes: Vec<(RelationId, RelationOutcome)> = jobs
        .par_iter()
        .map(|&r| {
            let space = spaces.for_relation(r).expect("checked above");
            Ok((r, evaluate_relation(g, split, point, cfg, space, r, label_mode)?))
        })
        .collect::<Result<_>>()?;

    let mut per_relation = Vec::new();
    for (r, outcome) in outcomes {
        match outcome {
            RelationOutcome::Evaluated(rep) => per_relation.push(rep),
            RelationOutcome::Skipped(reason) => skipped.push(skip(r, reason)),
        }
    }
    skipped.sort_by_key(|s| s.relation_index);

    let mut warnings = split.warnings.clone();
    for s in &skipped {
        let w = format!("{mode} f={}: skipped relation {:?}: {}", point.fraction, s.relation, s.reason);
        log::warn!("{w}");
        warnings.push(w);
    }

    let counts: Vec<ConfusionCounts> = per_relation.iter().map(|r| r.counts).collect();
    let agg = aggregate(&counts)?;
    Ok(EvalReport {
        toolkit_version: crate::VERSION.to_owned(),
        mode,
        fraction: point.fraction,
        seed: cfg.seed,
        config: BenchConfig {
            mode,
            ..cfg.clone()
        },
        per_relation,
        skipped,
        micro_counts: agg.micro_counts,
        micro: agg.micro,
        micro_f1: agg.micro.f1,
        macro_f1: agg.macro_f1,
        warnings,
    })
}

fn test_positive_set(split: &DataSplit) -> HashSet<Triple> {
    split.test_positives().copied().collect()
}

/// Evaluates `mode` on a precomputed split at full training data.
pub fn run_on_split(
    g: &KnowledgeGraph,
    split: &DataSplit,
    cfg: &BenchConfig,
    mode: Mode,
    observer: &mut dyn BenchObserver,
) -> Result<EvalReport> {
    run_on_split_with(g, split, cfg, mode, Labels::True, observer)
}

/// As [`run_on_split`], choosing how classifier labels are presented.
pub fn run_on_split_with(
    g: &KnowledgeGraph,
    split: &DataSplit,
    cfg: &BenchConfig,
    mode: Mode,
    label_mode: Labels,
    observer: &mut dyn BenchObserver,
) -> Result<EvalReport> {
    cfg.validate()?;
    let test_pos = test_positive_set(split);
    let point = TrainingPoint::full(split);
    let spaces = train_spaces(g, split, &point, cfg, mode, &test_pos, observer)?;
    evaluate_point(g, split, &point, &spaces, cfg, mode, &test_pos, label_mode, observer)
}

/// One embedding space for the whole training graph.
pub fn run_global(g: &KnowledgeGraph, cfg: &BenchConfig) -> Result<EvalReport> {
    let split = build_split(g, &cfg.split, cfg.seed)?;
    run_on_split(g, &split, cfg, Mode::Global, &mut NoObserver)
}

/// One embedding space per relation, trained on that relation's edges only.
pub fn run_local(g: &KnowledgeGraph, cfg: &BenchConfig) -> Result<EvalReport> {
    let split = build_split(g, &cfg.split, cfg.seed)?;
    run_on_split(g, &split, cfg, Mode::Local, &mut NoObserver)
}

/// Learning curve over `cfg.fractions` on a precomputed split. Points where
/// no relation keeps a training positive, or nothing is evaluable, are
/// skipped with a warning.
pub fn learning_curve_on_split(
    g: &KnowledgeGraph,
    split: &DataSplit,
    cfg: &BenchConfig,
    mode: Mode,
    observer: &mut dyn BenchObserver,
) -> Result<Vec<(f64, EvalReport)>> {
    cfg.validate()?;
    let test_pos = test_positive_set(split);
    let points = training_points(g, split, &cfg.fractions)?;

    let full_spaces = match cfg.limit_scope {
        LimitScope::ClassifierOnly => Some(train_spaces(
            g,
            split,
            &TrainingPoint::full(split),
            cfg,
            mode,
            &test_pos,
            observer,
        )?),
        LimitScope::EmbeddingsAndClassifier => None,
    };

    let mut out = Vec::with_capacity(points.len());
    for point in &points {
        if point.is_empty() {
            log::warn!("fraction {} leaves no training positives; point skipped", point.fraction);
            continue;
        }
        let retrained;
        let spaces = match &full_spaces {
            Some(s) => s,
            None => {
                retrained = match train_spaces(g, split, point, cfg, mode, &test_pos, observer) {
                    Ok(s) => s,
                    Err(Error::InvalidParameter(msg)) => {
                        log::warn!("fraction {}: {msg}; point skipped", point.fraction);
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                &retrained
            }
        };
        match evaluate_point(g, split, point, spaces, cfg, mode, &test_pos, Labels::True, observer) {
            Ok(report) => out.push((point.fraction, report)),
            Err(Error::NothingToEvaluate(msg)) => {
                log::warn!("fraction {}: {msg}; point skipped", point.fraction);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

pub fn learning_curve(g: &KnowledgeGraph, cfg: &BenchConfig) -> Result<Vec<(f64, EvalReport)>> {
    let split = build_split(g, &cfg.split, cfg.seed)?;
    learning_curve_on_split(g, &split, cfg, cfg.mode, &mut NoObserver)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fraction_validation() {
        assert!(validate_fractions(&[0.1, 0.5, 1.0]).is_ok());
        assert!(validate_fractions(&[]).is_err());
        assert!(validate_fractions(&[0.0, 1.0]).is_err());
        assert!(validate_fractions(&[0.5, 0.1]).is_err());
        assert!(validate_fractions(&[0.5, 1.5]).is_err());
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = BenchConfig::default();
        let json = serde_json::to_string(&cfg).unwrap();
        assert!(json.contains("\"relation-subgraph\""));
        assert!(json.contains("\"classifier_only\""));
        let back: BenchConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
    }
}
