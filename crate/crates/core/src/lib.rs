//! Equivariant cross-graph message passing for protein–ligand complexes.
//!
//! The crate covers the full pipeline: graph construction from atom records,
//! trajectory ingestion, the equivariant network with cross-graph attention,
//! next-frame pre-training, affinity fine-tuning, evaluation metrics, and a
//! synthetic data generator used to check all of it at desk scale.

pub mod diffcore;
pub mod egnn;
pub mod error;
pub mod evalmetrics;
pub mod molgraph;
pub mod synth;
pub mod train;
pub mod trajio;

pub use error::{Error, Result};
