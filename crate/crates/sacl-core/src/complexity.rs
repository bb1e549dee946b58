//! Slice difficulty: four table-driven factors summed into a score in
//! `[2.0, 11.0]`, then bucketed into Easy / Medium / Hard.

use serde::{Deserialize, Serialize};

use crate::imagemetrics::{quality_tier, QualityThresholds, QualityTier};
use crate::manifest::{DatasetManifest, ManifestError, NoduleBox, SliceRecord};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexityFactors {
    pub f_cnt: f64,
    pub f_size: f64,
    pub f_shape: f64,
    pub f_qual: f64,
}

impl ComplexityFactors {
    pub fn score(&self) -> f64 {
        complexity_score(self)
    }
}

pub const MIN_SCORE: f64 = 2.0;
pub const MAX_SCORE: f64 = 11.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DifficultyTier {
    Easy,
    Medium,
    Hard,
}

impl DifficultyTier {
    pub const ALL: [DifficultyTier; 3] = [DifficultyTier::Easy, DifficultyTier::Medium, DifficultyTier::Hard];

    pub fn name(self) -> &'static str {
        match self {
            DifficultyTier::Easy => "Easy",
            DifficultyTier::Medium => "Medium",
            DifficultyTier::Hard => "Hard",
        }
    }
}

/// Easy is `c <= easy_max`, Medium is `easy_max < c <= medium_max`, Hard above.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TierThresholds {
    pub easy_max: f64,
    pub medium_max: f64,
}

impl Default for TierThresholds {
    fn default() -> Self {
        Self {
            easy_max: 4.0,
            medium_max: 7.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoringConfig {
    /// A box is irregular when `max(w/h, h/w)` exceeds this.
    pub aspect_ratio_threshold: f64,
    pub quality: QualityThresholds,
    pub tiers: TierThresholds,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self {
            aspect_ratio_threshold: 1.5,
            quality: QualityThresholds::default(),
            tiers: TierThresholds::default(),
        }
    }
}

pub fn count_factor(nodules: usize) -> f64 {
    match nodules {
        0 => 0.5,
        1 => 1.0,
        2 | 3 => 2.5,
        _ => 4.0,
    }
}

/// By the smallest box area in pixels; 400 and 1000 fall in the middle band.
pub fn size_factor(boxes: &[NoduleBox]) -> f64 {
    match boxes.iter().map(NoduleBox::area).min() {
        None => 0.5,
        Some(a) if a > 1000 => 0.5,
        Some(a) if a >= 400 => 1.0,
        Some(_) => 3.0,
    }
}

pub fn shape_factor(boxes: &[NoduleBox], aspect_ratio_threshold: f64) -> f64 {
    let irregular = boxes
        .iter()
        .filter(|b| b.aspect_ratio() > aspect_ratio_threshold)
        .count();
    match irregular {
        0 => 0.5,
        1 => 1.0,
        _ => 2.0,
    }
}

pub fn quality_factor(tier: QualityTier) -> f64 {
    match tier {
        QualityTier::High => 0.5,
        QualityTier::Medium => 1.0,
        QualityTier::Low => 2.0,
    }
}

pub fn complexity_factors(s: &SliceRecord, cfg: &ScoringConfig) -> Result<ComplexityFactors, ManifestError> {
    let q = s.quality.as_ref().ok_or_else(|| ManifestError::MissingQuality {
        slice_id: s.slice_id.clone(),
    })?;
    Ok(ComplexityFactors {
        f_cnt: count_factor(s.boxes.len()),
        f_size: size_factor(&s.boxes),
        f_shape: shape_factor(&s.boxes, cfg.aspect_ratio_threshold),
        f_qual: quality_factor(quality_tier(q, &cfg.quality)),
    })
}

pub fn complexity_score(f: &ComplexityFactors) -> f64 {
    f.f_cnt + f.f_size + f.f_shape + f.f_qual
}

pub fn difficulty_tier(c: f64, t: &TierThresholds) -> DifficultyTier {
    if c <= t.easy_max {
        DifficultyTier::Easy
    } else if c <= t.medium_max {
        DifficultyTier::Medium
    } else {
        DifficultyTier::Hard
    }
}

/// Annotate every slice with its factors and score.
pub fn score_manifest(m: &DatasetManifest, cfg: &ScoringConfig) -> Result<DatasetManifest, ManifestError> {
    for s in m.slices() {
        complexity_factors(s, cfg)?;
    }
    Ok(m.map_slices(|s| {
        let f = complexity_factors(s, cfg).expect("checked above");
        let mut out = s.clone();
        out.complexity = Some(f.score());
        out.factors = Some(f);
        out
    }))
}

/// Tier of a scored slice.
pub fn slice_tier(s: &SliceRecord, t: &TierThresholds) -> Result<DifficultyTier, ManifestError> {
    s.complexity
        .map(|c| difficulty_tier(c, t))
        .ok_or_else(|| ManifestError::Unscored {
            slice_id: s.slice_id.clone(),
        })
}

/// Slice counts per tier, indexed Easy, Medium, Hard.
pub fn tier_histogram(m: &DatasetManifest, t: &TierThresholds) -> Result<[usize; 3], ManifestError> {
    let mut counts = [0usize; 3];
    for s in m.slices() {
        counts[slice_tier(s, t)? as usize] += 1;
    }
    Ok(counts)
}
