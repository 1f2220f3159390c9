//! Confusion counts, precision/recall/F1 and their micro/macro aggregates.

mod report;

pub use report::{
    write_comparison_csv, write_report_csv, write_report_json, EvalReport, Mode, RelationReport,
    SkippedRelation, CSV_HEADER,
};

use std::ops::Add;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// Counts after swapping the positive and negative class.
    pub fn swapped(&self) -> Self {
        ConfusionCounts {
            tp: self.tn,
            fp: self.fn_,
            tn: self.tp,
            fn_: self.fp,
        }
    }
}

impl Add for ConfusionCounts {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        ConfusionCounts {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            tn: self.tn + o.tn,
            fn_: self.fn_ + o.fn_,
        }
    }
}

impl std::iter::Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(ConfusionCounts::default(), Add::add)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prf1 {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub micro_counts: ConfusionCounts,
    pub micro: Prf1,
    pub macro_f1: f64,
    /// Relations that entered the macro mean.
    pub n_relations: usize,
}

pub fn confusion(predictions: &[bool], labels: &[bool]) -> Result<ConfusionCounts> {
    if predictions.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: labels.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::NothingToEvaluate("empty prediction list".into()));
    }
    let mut c = ConfusionCounts::default();
    for (&p, &y) in predictions.iter().zip(labels) {
        match (p, y) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Precision, recall and F1; every zero denominator yields 0.
pub fn prf1(c: &ConfusionCounts) -> Prf1 {
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Prf1 {
        precision,
        recall,
        f1,
    }
}

/// True when prf1 had to fall back to a zero-denominator convention.
pub fn has_zero_denominator(c: &ConfusionCounts) -> bool {
    c.tp + c.fp == 0 || c.tp + c.fn_ == 0 || c.tp == 0
}

/// Micro F1 over summed counts and macro F1 as the unweighted mean over
/// relations with a non-empty test set.
pub fn aggregate(per_relation: &[ConfusionCounts]) -> Result<Aggregate> {
    let evaluable: Vec<&ConfusionCounts> = per_relation.iter().filter(|c| c.total() > 0).collect();
    if evaluable.is_empty() {
        return Err(Error::NothingToEvaluate("no relation has a non-empty test set".into()));
    }
    let micro_counts: ConfusionCounts = evaluable.iter().copied().copied().sum();
    let f1_sum: f64 = evaluable.iter().map(|c| prf1(c).f1).sum();
    Ok(Aggregate {
        micro_counts,
        micro: prf1(&micro_counts),
        macro_f1: f1_sum / evaluable.len() as f64,
        n_relations: evaluable.len(),
    })
}
