use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{ConfusionCounts, Prf1};
use crate::bench::BenchConfig;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Global,
    Local,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Global => "global",
            Mode::Local => "local",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(Mode::Global),
            "local" => Ok(Mode::Local),
            _ => Err(Error::param(format!("unknown mode {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelationReport {
    pub relation: String,
    pub relation_index: u32,
    pub counts: ConfusionCounts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Evaluated test positives/negatives, after OOV dropping.
    pub n_test_pos: usize,
    pub n_test_neg: usize,
    pub n_dropped_oov: usize,
    pub n_train_pos: usize,
    pub n_train_neg: usize,
    pub n_train_dropped_oov: usize,
    /// Rows in the embedding space the classifier was fed from.
    pub embedding_rows: usize,
    /// Precision, recall or F1 fell back to the zero-denominator convention.
    pub zero_denominator: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedRelation {
    pub relation: String,
    pub relation_index: u32,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub toolkit_version: String,
    pub mode: Mode,
    pub fraction: f64,
    pub seed: u64,
    pub config: BenchConfig,
    pub per_relation: Vec<RelationReport>,
    pub skipped: Vec<SkippedRelation>,
    pub micro_counts: ConfusionCounts,
    pub micro: Prf1,
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub warnings: Vec<String>,
}

impl EvalReport {
    pub fn relation(&self, label: &str) -> Option<&RelationReport> {
        self.per_relation.iter().find(|r| r.relation == label)
    }
}

pub fn write_report_json(report: &EvalReport, path: &Path) -> Result<()> {
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub const CSV_HEADER: [&str; 13] = [
    "relation",
    "n_test_pos",
    "n_test_neg",
    "tp",
    "fp",
    "tn",
    "fn",
    "precision",
    "recall",
    "f1",
    "mode",
    "fraction",
    "seed",
];

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

pub fn write_report_csv(report: &EvalReport, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(CSV_HEADER)?;
    for r in &report.per_relation {
        w.write_record([
            r.relation.clone(),
            r.n_test_pos.to_string(),
            r.n_test_neg.to_string(),
            r.counts.tp.to_string(),
            r.counts.fp.to_string(),
            r.counts.tn.to_string(),
            r.counts.fn_.to_string(),
            r.precision.to_string(),
            r.recall.to_string(),
            r.f1.to_string(),
            report.mode.to_string(),
            report.fraction.to_string(),
            report.seed.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Side-by-side global/local table, one row per relation present in either
/// report. Missing sides are left blank.
pub fn write_comparison_csv(global: &EvalReport, local: &EvalReport, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "relation",
        "fraction",
        "global_n_test_pos",
        "global_n_test_neg",
        "global_n_dropped_oov",
        "global_f1",
        "local_n_test_pos",
        "local_n_test_neg",
        "local_n_dropped_oov",
        "local_f1",
        "f1_delta",
    ])?;
    let indices: BTreeSet<(u32, &str)> = global
        .per_relation
        .iter()
        .chain(&local.per_relation)
        .map(|r| (r.relation_index, r.relation.as_str()))
        .collect();
    let side = |r: Option<&RelationReport>| -> [String; 4] {
        match r {
            Some(r) => [
                r.n_test_pos.to_string(),
                r.n_test_neg.to_string(),
                r.n_dropped_oov.to_string(),
                r.f1.to_string(),
            ],
            None => Default::default(),
        }
    };
    for (_, label) in indices {
        let g = global.relation(label);
        let l = local.relation(label);
        let delta = match (g, l) {
            (Some(g), Some(l)) => (l.f1 - g.f1).to_string(),
            _ => String::new(),
        };
        let mut row = vec![label.to_owned(), global.fraction.to_string()];
        row.extend(side(g));
        row.extend(side(l));
        row.push(delta);
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
