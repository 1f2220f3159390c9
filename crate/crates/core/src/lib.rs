//! Benchmark toolkit for knowledge-graph entity embeddings, evaluated as
//! per-relation binary link classifiers.
//!
//! Pipeline: [`graph`] loads triples, [`split`] holds out test edges and
//! samples corrupted negatives, [`embed`] trains entity vectors (globally or
//! per relation), [`featclass`] turns entity pairs into features and fits a
//! logistic regression, [`metrics`] scores it, and [`bench`] runs the whole
//! protocol including learning curves over training-data fractions.

pub mod bench;
pub mod cli;
pub mod embed;
pub mod error;
pub mod featclass;
pub mod graph;
pub mod math;
pub mod metrics;
pub mod seed;
pub mod split;
pub mod synth;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
