//! Difficulty scoring, curriculum construction and scale adaptation for
//! slice-level detection datasets.
//!
//! Everything in this crate is pure and deterministic: no IO, no global
//! state, no clocks. Randomness comes from [`rng::Stream`], which derives
//! independent generators from a single user seed and a purpose tag so
//! that split, subset and sampling streams never alias.
//!
//! File formats, image decoding and the command-line driver live in the
//! `sacl` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod complexity;
pub mod curriculum;
pub mod imagemetrics;
pub mod manifest;
pub mod rng;
pub mod sacl;
pub mod sampler;
pub mod simharness;
pub mod splitter;

pub use complexity::{ComplexityFactors, DifficultyTier, ScoringConfig, TierThresholds};
pub use curriculum::{CurriculumConfig, CurriculumPlan, PoolEntry, StagePlan, StagePool, Strategy};
pub use imagemetrics::{GrayImage, QualityFeatures, QualityThresholds, QualityTier};
pub use manifest::{DatasetManifest, ManifestError, NoduleBox, SliceRecord};
pub use sacl::SaclParams;
pub use sampler::{Batch, BatchPlan};
pub use splitter::{DatasetSplit, ScaleSubset, SplitRatios};

/// Version string stamped into emitted plans.
pub const GENERATOR: &str = concat!("sacl-core ", env!("CARGO_PKG_VERSION"));
