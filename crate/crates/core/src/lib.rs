//! Digital-phenotyping pipeline for smartphone self-report and sensor data.
//!
//! Stages, in pipeline order:
//!
//! - [`cohort`]: ingestion, validation and risk labeling
//! - [`features`]: per-day feature extraction with cumulative-median aggregation
//! - [`nn`]: dense networks, losses, Adam and gradient checking
//! - [`contrastive`]: triplet pretraining, supervised fine-tuning, user-level inference
//! - [`eval`]: leave-one-subject-out experiments, metrics and significance tests
//! - [`explain`]: permutation-sampled Shapley attribution
//! - [`synth`]: synthetic cohorts with planted risk/behavior couplings

pub mod cohort;
pub mod contrastive;
pub mod error;
pub mod eval;
pub mod explain;
pub mod features;
pub mod nn;
pub mod synth;

pub use error::{Error, Result};
