//! Shallow entity embeddings trained with a logistic negative-sampling
//! objective over (head, tail) pairs.
//!
//! Relation labels are ignored during training: the same routine produces a
//! global space (all relations) or a local one (a single relation's edges).

mod io;
mod sgns;

pub use io::{export_embeddings, import_embeddings, EmbeddingSidecar};
pub use sgns::{sgns_objective, train_embeddings, train_on_stream};

use rand::RngExt;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EntityId, EntityMap};
use crate::math::dot;
use crate::seed;

/// Learning rate decays linearly from `lr0` to `lr0 * LR_FLOOR_FRACTION`.
pub const LR_FLOOR_FRACTION: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub dim: usize,
    pub epochs: usize,
    pub lr0: f64,
    /// Negatives drawn per positive.
    pub neg_k: usize,
    pub seed: u64,
    /// Sequential, bit-reproducible updates. When false, workers share the
    /// matrix without locks and may overwrite each other's updates.
    pub deterministic: bool,
    /// Final learning rate as a fraction of `lr0`.
    #[serde(default = "default_lr_floor")]
    pub lr_floor_fraction: f64,
}

fn default_lr_floor() -> f64 {
    LR_FLOOR_FRACTION
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            dim: 64,
            epochs: 100,
            lr0: 0.05,
            neg_k: 5,
            seed: 0,
            deterministic: true,
            lr_floor_fraction: LR_FLOOR_FRACTION,
        }
    }
}

impl EmbeddingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::param("embedding dim must be >= 1"));
        }
        if self.epochs == 0 {
            return Err(Error::param("epochs must be >= 1"));
        }
        if !(self.lr0.is_finite() && self.lr0 > 0.0) {
            return Err(Error::param(format!("lr0 must be > 0, got {}", self.lr0)));
        }
        if self.neg_k == 0 {
            return Err(Error::param("neg_k must be >= 1"));
        }
        if !(self.lr_floor_fraction > 0.0 && self.lr_floor_fraction <= 1.0) {
            return Err(Error::param(format!(
                "lr_floor_fraction must lie in (0, 1], got {}",
                self.lr_floor_fraction
            )));
        }
        Ok(())
    }

    /// Learning rate for update `step` of `total`.
    pub fn learning_rate(&self, step: usize, total: usize) -> f64 {
        let floor = self.lr0 * self.lr_floor_fraction;
        if total <= 1 {
            return self.lr0;
        }
        let progress = (step.min(total - 1)) as f64 / (total - 1) as f64;
        self.lr0 - (self.lr0 - floor) * progress
    }
}

/// Dense `rows x dim` matrix of entity vectors, addressed by global
/// [`EntityId`] through an [`EntityMap`].
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingSpace {
    dim: usize,
    vectors: Vec<f64>,
    entity_map: EntityMap,
    config: EmbeddingConfig,
    epoch_losses: Vec<f64>,
}

impl EmbeddingSpace {
    pub fn from_rows(
        dim: usize,
        vectors: Vec<f64>,
        entity_map: EntityMap,
        config: EmbeddingConfig,
    ) -> Result<Self> {
        if dim == 0 || vectors.len() != dim * entity_map.len() {
            return Err(Error::DimensionMismatch {
                expected: dim * entity_map.len(),
                got: vectors.len(),
            });
        }
        Ok(EmbeddingSpace {
            dim,
            vectors,
            entity_map,
            config,
            epoch_losses: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_rows(&self) -> usize {
        self.entity_map.len()
    }

    pub fn config(&self) -> &EmbeddingConfig {
        &self.config
    }

    /// Mean per-positive loss of each epoch, in order.
    pub fn epoch_losses(&self) -> &[f64] {
        &self.epoch_losses
    }

    /// Mean loss of the last epoch, or NaN if the space was never trained.
    pub fn final_loss(&self) -> f64 {
        self.epoch_losses.last().copied().unwrap_or(f64::NAN)
    }

    pub fn entity_map(&self) -> &EntityMap {
        &self.entity_map
    }

    pub fn contains(&self, e: EntityId) -> bool {
        self.entity_map.to_local(e).is_some()
    }

    pub fn vector(&self, e: EntityId) -> Option<&[f64]> {
        let row = self.entity_map.to_local(e)?.index();
        Some(&self.vectors[row * self.dim..(row + 1) * self.dim])
    }

    pub fn try_vector(&self, e: EntityId) -> Result<&[f64]> {
        self.vector(e)
            .ok_or_else(|| Error::UnknownEntity(format!("#{} has no embedding", e.0)))
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.vectors[row * self.dim..(row + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.vectors
    }

    /// Replaces the row -> entity map, keeping the vectors.
    pub fn with_entity_map(mut self, entity_map: EntityMap) -> Result<Self> {
        if entity_map.len() != self.n_rows() {
            return Err(Error::DimensionMismatch {
                expected: self.n_rows(),
                got: entity_map.len(),
            });
        }
        self.entity_map = entity_map;
        Ok(self)
    }

    pub fn is_finite(&self) -> bool {
        self.vectors.iter().all(|v| v.is_finite())
    }
}

/// Uniform `[-0.5/d, 0.5/d]` initialisation, one row per entity.
pub fn init_embeddings(n_entities: usize, config: &EmbeddingConfig) -> Result<EmbeddingSpace> {
    if n_entities == 0 {
        return Err(Error::param("cannot embed zero entities"));
    }
    config.validate()?;
    let mut rng = seed::rng_from(config.seed);
    let vectors = init_vectors(n_entities, config.dim, &mut rng);
    EmbeddingSpace::from_rows(config.dim, vectors, EntityMap::identity(n_entities), config.clone())
}

pub(crate) fn init_vectors(n: usize, dim: usize, rng: &mut seed::Rng) -> Vec<f64> {
    let half = 0.5 / dim as f64;
    (0..n * dim).map(|_| rng.random_range(-half..=half)).collect()
}

/// Dot product `v_h . v_t`.
pub fn score(space: &EmbeddingSpace, h: EntityId, t: EntityId) -> Result<f64> {
    Ok(dot(space.try_vector(h)?, space.try_vector(t)?))
}
