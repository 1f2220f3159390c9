//! Planted-partition graph generator for fixtures and sanity benchmarks.
//!
//! Entities are split into equal blocks. Every unordered pair `i < j` is
//! visited once: same-block pairs become `intra` edges with probability
//! `p_in`, cross-block pairs `inter` edges with probability `p_out`. Edges
//! are written head = lower index.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::RngExt;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{KnowledgeGraph, LoadStats};
use crate::seed;

pub const INTRA: &str = "intra";
pub const INTER: &str = "inter";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantedPartition {
    pub blocks: usize,
    pub nodes_per_block: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub seed: u64,
}

impl PlantedPartition {
    pub fn validate(&self) -> Result<()> {
        if self.p_in == 0.0 && self.p_out == 0.0 {
            return Err(Error::param("empty graph: p_in and p_out are both 0"));
        }
        if self.blocks < 2 {
            return Err(Error::param(format!("need at least 2 blocks, got {}", self.blocks)));
        }
        if self.nodes_per_block < 2 {
            return Err(Error::param(format!(
                "need at least 2 nodes per block, got {}",
                self.nodes_per_block
            )));
        }
        if !(self.p_in > 0.0 && self.p_in <= 1.0) {
            return Err(Error::param(format!("p_in must lie in (0, 1], got {}", self.p_in)));
        }
        if !(0.0..=1.0).contains(&self.p_out) {
            return Err(Error::param(format!("p_out must lie in [0, 1], got {}", self.p_out)));
        }
        Ok(())
    }

    pub fn block_of(&self, node: usize) -> usize {
        node / self.nodes_per_block
    }

    pub fn label(&self, node: usize) -> String {
        format!("b{}_n{}", self.block_of(node), node % self.nodes_per_block)
    }

    /// Sampled edges as `(head, relation, tail)` labels.
    pub fn generate(&self) -> Result<Vec<(String, &'static str, String)>> {
        self.validate()?;
        let n = self.blocks * self.nodes_per_block;
        let mut rng = seed::derived_rng(self.seed, seed::TAG_SYNTH, 0);
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let same = self.block_of(i) == self.block_of(j);
                let p = if same { self.p_in } else { self.p_out };
                if p > 0.0 && rng.random_bool(p) {
                    let rel = if same { INTRA } else { INTER };
                    edges.push((self.label(i), rel, self.label(j)));
                }
            }
        }
        if edges.is_empty() {
            return Err(Error::NothingToEvaluate("empty graph: no edges were sampled".into()));
        }
        Ok(edges)
    }

    pub fn graph(&self) -> Result<(KnowledgeGraph, LoadStats)> {
        let edges = self.generate()?;
        Ok(KnowledgeGraph::from_labeled(
            edges.iter().map(|(h, r, t)| (h.as_str(), *r, t.as_str())),
        ))
    }

    pub fn write_tsv(&self, path: &Path) -> Result<usize> {
        let edges = self.generate()?;
        let mut buf = Vec::new();
        writeln!(
            buf,
            "# planted partition: blocks={} nodes_per_block={} p_in={} p_out={} seed={}",
            self.blocks, self.nodes_per_block, self.p_in, self.p_out, self.seed
        )
        .expect("write to Vec");
        for (h, r, t) in &edges {
            writeln!(buf, "{h}\t{r}\t{t}").expect("write to Vec");
        }
        fs::write(path, buf).map_err(|e| Error::io(path, e))?;
        Ok(edges.len())
    }
}
