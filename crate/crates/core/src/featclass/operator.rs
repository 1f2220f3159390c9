use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::embed::EmbeddingSpace;
use crate::error::{Error, Result};
use crate::graph::EntityId;

/// Combines two entity vectors into one edge feature vector.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeOperator {
    #[default]
    Hadamard,
    Average,
    Concat,
    L1,
    L2,
}

impl EdgeOperator {
    pub const ALL: [EdgeOperator; 5] = [
        EdgeOperator::Hadamard,
        EdgeOperator::Average,
        EdgeOperator::Concat,
        EdgeOperator::L1,
        EdgeOperator::L2,
    ];

    pub fn output_dim(self, dim: usize) -> usize {
        match self {
            EdgeOperator::Concat => 2 * dim,
            _ => dim,
        }
    }

    pub fn apply(self, u: &[f64], v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(u.len(), v.len());
        let pairs = u.iter().zip(v);
        match self {
            EdgeOperator::Hadamard => pairs.map(|(a, b)| a * b).collect(),
            EdgeOperator::Average => pairs.map(|(a, b)| (a + b) / 2.0).collect(),
            EdgeOperator::Concat => u.iter().chain(v).copied().collect(),
            EdgeOperator::L1 => pairs.map(|(a, b)| (a - b).abs()).collect(),
            EdgeOperator::L2 => pairs.map(|(a, b)| (a - b) * (a - b)).collect(),
        }
    }
}

impl fmt::Display for EdgeOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeOperator::Hadamard => "hadamard",
            EdgeOperator::Average => "average",
            EdgeOperator::Concat => "concat",
            EdgeOperator::L1 => "l1",
            EdgeOperator::L2 => "l2",
        })
    }
}

impl FromStr for EdgeOperator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EdgeOperator::ALL
            .into_iter()
            .find(|op| op.to_string() == s)
            .ok_or_else(|| Error::param(format!("unknown edge operator {s:?}")))
    }
}

pub fn edge_features(space: &EmbeddingSpace, h: EntityId, t: EntityId, op: EdgeOperator) -> Result<Vec<f64>> {
    Ok(op.apply(space.try_vector(h)?, space.try_vector(t)?))
}
