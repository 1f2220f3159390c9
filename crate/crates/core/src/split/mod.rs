//! Per-relation train/test partitioning and negative (corrupted) triples.

mod bundle;

pub use bundle::{export_split, import_split, SplitManifest, SPLIT_MANIFEST};

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::RngExt;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EntityId, KnowledgeGraph, RelationId, Triple};
use crate::seed::{self, derive_seed};

pub const DEFAULT_MIN_TEST_THRESHOLD: usize = 2;

/// Attempts allowed per requested negative before giving up.
pub const ATTEMPTS_PER_NEGATIVE: usize = 100;

/// Which side of a positive triple gets replaced.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorruptionStrategy {
    CorruptHead,
    CorruptTail,
    #[default]
    CorruptBoth,
}

impl fmt::Display for CorruptionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CorruptionStrategy::CorruptHead => "corrupt-head",
            CorruptionStrategy::CorruptTail => "corrupt-tail",
            CorruptionStrategy::CorruptBoth => "corrupt-both",
        })
    }
}

impl FromStr for CorruptionStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "corrupt-head" | "head" => Ok(CorruptionStrategy::CorruptHead),
            "corrupt-tail" | "tail" => Ok(CorruptionStrategy::CorruptTail),
            "corrupt-both" | "both" => Ok(CorruptionStrategy::CorruptBoth),
            _ => Err(Error::param(format!("unknown corruption strategy {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitParams {
    pub test_fraction: f64,
    pub neg_ratio_train: f64,
    pub strategy: CorruptionStrategy,
    pub filtered: bool,
    pub min_test_threshold: usize,
}

impl Default for SplitParams {
    fn default() -> Self {
        SplitParams {
            test_fraction: 0.2,
            neg_ratio_train: 1.0,
            strategy: CorruptionStrategy::CorruptBoth,
            filtered: true,
            min_test_threshold: DEFAULT_MIN_TEST_THRESHOLD,
        }
    }
}

impl SplitParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::param(format!(
                "test_fraction must lie in (0, 1), got {}",
                self.test_fraction
            )));
        }
        check_ratio(self.neg_ratio_train)?;
        Ok(())
    }
}

fn check_ratio(ratio: f64) -> Result<()> {
    if !(ratio.is_finite() && ratio >= 0.0) {
        return Err(Error::param(format!("negative ratio must be finite and >= 0, got {ratio}")));
    }
    Ok(())
}

/// Number of items `ratio * n` rounds to (half away from zero).
pub fn scaled_count(ratio: f64, n: usize) -> usize {
    (ratio * n as f64).round() as usize
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationSplit {
    pub relation: RelationId,
    pub train_pos: Vec<Triple>,
    pub test_pos: Vec<Triple>,
    pub train_neg: Vec<Triple>,
    pub test_neg: Vec<Triple>,
}

impl RelationSplit {
    /// At least one test positive, so an F1 can be computed.
    pub fn is_evaluable(&self) -> bool {
        !self.test_pos.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataSplit {
    pub params: SplitParams,
    pub seed: u64,
    /// One entry per relation of the source graph, indexed by relation id.
    pub relations: Vec<RelationSplit>,
    pub warnings: Vec<String>,
}

impl DataSplit {
    pub fn relation(&self, r: RelationId) -> &RelationSplit {
        &self.relations[r.index()]
    }

    pub fn train_positives(&self) -> impl Iterator<Item = &Triple> {
        self.relations.iter().flat_map(|s| s.train_pos.iter())
    }

    pub fn test_positives(&self) -> impl Iterator<Item = &Triple> {
        self.relations.iter().flat_map(|s| s.test_pos.iter())
    }
}

/// Uniform per-relation partition of the positives.
///
/// Relations with fewer than `min_test_threshold` triples put everything in
/// train. Negative lists are left empty.
pub fn split_edges(
    g: &KnowledgeGraph,
    test_fraction: f64,
    min_test_threshold: usize,
    seed: u64,
) -> Result<DataSplit> {
    let params = SplitParams {
        test_fraction,
        min_test_threshold,
        ..SplitParams::default()
    };
    params.validate()?;
    if g.is_empty() {
        return Err(Error::param("cannot split an empty graph"));
    }

    let mut warnings = Vec::new();
    let relations: Vec<RelationSplit> = g
        .relation_ids()
        .map(|r| {
            let mut pos = g.by_relation(r).to_vec();
            let (train_pos, test_pos) = if pos.len() < min_test_threshold {
                warnings.push(format!(
                    "relation {:?} has {} triple(s), below min_test_threshold={}; no test edges",
                    g.relation_label(r),
                    pos.len(),
                    min_test_threshold
                ));
                (pos, Vec::new())
            } else {
                let k = scaled_count(test_fraction, pos.len());
                pos.shuffle(&mut seed::derived_rng(seed, seed::TAG_SPLIT, r.0 as u64));
                let train = pos.split_off(k);
                (train, pos)
            };
            RelationSplit {
                relation: r,
                train_pos,
                test_pos,
                train_neg: Vec::new(),
                test_neg: Vec::new(),
            }
        })
        .collect();
    for w in &warnings {
        log::warn!("{w}");
    }

    Ok(DataSplit {
        params,
        seed,
        relations,
        warnings,
    })
}

/// Corrupts uniformly chosen positives until `round(ratio * |positives|)`
/// distinct negatives are found.
///
/// A candidate is rejected if it is a self-loop, a member of `g` (when
/// `filtered`), a member of `forbid`, or already emitted.
pub fn sample_negatives(
    g: &KnowledgeGraph,
    positives: &[Triple],
    ratio: f64,
    strategy: CorruptionStrategy,
    filtered: bool,
    forbid: &HashSet<Triple>,
    seed: u64,
) -> Result<Vec<Triple>> {
    check_ratio(ratio)?;
    let requested = scaled_count(ratio, positives.len());
    if requested == 0 {
        return Ok(Vec::new());
    }
    let n_entities = g.n_entities();
    if n_entities < 2 {
        return Err(Error::param("negative sampling needs at least 2 entities"));
    }
    let n_entities = n_entities as u32;

    let mut rng = seed::rng_from(seed);
    let mut emitted = HashSet::with_capacity(requested);
    let mut out = Vec::with_capacity(requested);
    let max_attempts = ATTEMPTS_PER_NEGATIVE * requested;
    let mut attempts = 0;

    while out.len() < requested {
        if attempts == max_attempts {
            return Err(Error::NegativesExhausted {
                relation: g.relation_label(positives[0].relation).to_owned(),
                requested,
                found: out.len(),
                attempts,
            });
        }
        attempts += 1;

        let p = positives[rng.random_range(0..positives.len())];
        let replace_head = match strategy {
            CorruptionStrategy::CorruptHead => true,
            CorruptionStrategy::CorruptTail => false,
            CorruptionStrategy::CorruptBoth => rng.random_bool(0.5),
        };
        let e = EntityId(rng.random_range(0..n_entities));
        let candidate = if replace_head {
            Triple::new(e, p.relation, p.tail)
        } else {
            Triple::new(p.head, p.relation, e)
        };

        if candidate.is_self_loop()
            || (filtered && g.contains(&candidate))
            || forbid.contains(&candidate)
            || emitted.contains(&candidate)
        {
            continue;
        }
        emitted.insert(candidate);
        out.push(candidate);
    }
    Ok(out)
}

/// Full split: positives partitioned per relation, then train negatives at
/// `neg_ratio_train` and test negatives at 1:1, disjoint from the train ones.
pub fn build_split(g: &KnowledgeGraph, params: &SplitParams, seed: u64) -> Result<DataSplit> {
    params.validate()?;
    let mut split = split_edges(g, params.test_fraction, params.min_test_threshold, seed)?;
    split.params = params.clone();

    let negatives: Vec<(Vec<Triple>, Vec<Triple>)> = split
        .relations
        .par_iter()
        .map(|rs| {
            let r = rs.relation.0 as u64;
            let train_neg = sample_negatives(
                g,
                &rs.train_pos,
                params.neg_ratio_train,
                params.strategy,
                params.filtered,
                &HashSet::new(),
                derive_seed(seed, seed::TAG_NEG_TRAIN, r),
            )?;
            let forbid: HashSet<Triple> = train_neg.iter().copied().collect();
            let test_neg = sample_negatives(
                g,
                &rs.test_pos,
                1.0,
                params.strategy,
                params.filtered,
                &forbid,
                derive_seed(seed, seed::TAG_NEG_TEST, r),
            )?;
            Ok((train_neg, test_neg))
        })
        .collect::<Result<_>>()?;

    for (rs, (train_neg, test_neg)) in split.relations.iter_mut().zip(negatives) {
        rs.train_neg = train_neg;
        rs.test_neg = test_neg;
    }
    Ok(split)
}
