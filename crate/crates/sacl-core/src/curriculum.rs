//! Static three-stage curriculum and per-stage sample eligibility.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::complexity::{slice_tier, DifficultyTier, ScoringConfig};
use crate::imagemetrics::{quality_tier, QualityTier};
use crate::manifest::{DatasetManifest, ManifestError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("stage {stage}: {reason}")]
    InvalidStage { stage: usize, reason: &'static str },
    #[error("invalid {field}: {reason}")]
    InvalidConfig { field: &'static str, reason: &'static str },
    #[error("rho must lie in (0, 1], got {0}")]
    BadRho(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub r#box: f64,
    pub cls: f64,
    pub dfl: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentationPolicy {
    pub rotation_deg: f64,
    pub translate_frac: f64,
    pub scale_frac: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StagePlan {
    /// 1-based.
    pub index: usize,
    pub resolution_px: u32,
    pub epochs: u32,
    pub lr: f64,
    pub loss: LossWeights,
    pub aug: AugmentationPolicy,
    pub eligible_tiers: Vec<DifficultyTier>,
    pub eligible_neg_quality: Vec<QualityTier>,
    pub min_hard_ratio: f64,
}

pub const STAGE_RESOLUTIONS: [u32; 3] = [512, 640, 768];

impl StagePlan {
    pub fn validate(&self) -> Result<(), PlanError> {
        let bad = |reason| PlanError::InvalidStage {
            stage: self.index,
            reason,
        };
        if self.epochs < 1 {
            return Err(bad("epochs must be >= 1"));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(bad("lr must be positive"));
        }
        if !STAGE_RESOLUTIONS.contains(&self.resolution_px) {
            return Err(bad("resolution must be 512, 640 or 768"));
        }
        let l = &self.loss;
        if [l.r#box, l.cls, l.dfl].iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(bad("loss weights must be non-negative"));
        }
        let a = &self.aug;
        if !(a.rotation_deg >= 0.0) || ![a.translate_frac, a.scale_frac].iter().all(|f| (0.0..=1.0).contains(f)) {
            return Err(bad("augmentation out of range"));
        }
        if !(0.0..=1.0).contains(&self.min_hard_ratio) {
            return Err(bad("min_hard_ratio must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Cl,
    Sacl,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regularization {
    pub weight_decay: f64,
    pub dropout: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub generator: String,
}

/// Scale metadata. This is the only part of a plan that differs between a
/// static plan and its SACL adaptation at `rho = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scale {
    pub strategy: Strategy,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurriculumPlan {
    pub scale: Scale,
    pub stages: Vec<StagePlan>,
    pub regularization: Regularization,
    pub provenance: Provenance,
}

impl CurriculumPlan {
    pub fn total_epochs(&self) -> u64 {
        self.stages.iter().map(|s| u64::from(s.epochs)).sum()
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        for (i, s) in self.stages.iter().enumerate() {
            if s.index != i + 1 {
                return Err(PlanError::InvalidStage {
                    stage: s.index,
                    reason: "stages must be numbered 1..S in order",
                });
            }
            s.validate()?;
        }
        if self.stages.is_empty() {
            return Err(PlanError::InvalidConfig {
                field: "stages",
                reason: "plan has no stages",
            });
        }
        let rho = self.scale.rho;
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(PlanError::BadRho(rho));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurriculumConfig {
    pub stages: Vec<StagePlan>,
    /// Hard-sample floor carried by every static stage.
    pub r0: f64,
    pub regularization: Regularization,
    pub provenance: Provenance,
}

/// The three stages with their published settings.
pub fn default_stages(r0: f64) -> Vec<StagePlan> {
    use DifficultyTier::*;
    use QualityTier::{High, Low, Medium as Mid};
    vec![
        StagePlan {
            index: 1,
            resolution_px: 512,
            epochs: 50,
            lr: 0.003,
            loss: LossWeights {
                r#box: 2.0,
                cls: 4.0,
                dfl: 0.1,
            },
            aug: AugmentationPolicy {
                rotation_deg: 3.0,
                translate_frac: 0.05,
                scale_frac: 0.10,
            },
            eligible_tiers: vec![Easy],
            eligible_neg_quality: vec![High],
            min_hard_ratio: r0,
        },
        StagePlan {
            index: 2,
            resolution_px: 640,
            epochs: 100,
            lr: 0.002,
            loss: LossWeights {
                r#box: 5.0,
                cls: 2.0,
                dfl: 0.5,
            },
            aug: AugmentationPolicy {
                rotation_deg: 8.0,
                translate_frac: 0.10,
                scale_frac: 0.20,
            },
            eligible_tiers: vec![Easy, Medium],
            eligible_neg_quality: vec![High, Mid],
            min_hard_ratio: r0,
        },
        StagePlan {
            index: 3,
            resolution_px: 768,
            epochs: 100,
            lr: 0.001,
            loss: LossWeights {
                r#box: 7.0,
                cls: 1.5,
                dfl: 1.0,
            },
            aug: AugmentationPolicy {
                rotation_deg: 12.0,
                translate_frac: 0.15,
                scale_frac: 0.30,
            },
            eligible_tiers: vec![Easy, Medium, Hard],
            eligible_neg_quality: vec![High, Mid, Low],
            min_hard_ratio: r0,
        },
    ]
}

pub const DEFAULT_R0: f64 = 0.1;
pub const DEFAULT_WEIGHT_DECAY: f64 = 0.0005;
pub const DEFAULT_DROPOUT: f64 = 0.0;

impl Default for CurriculumConfig {
    fn default() -> Self {
        Self {
            stages: default_stages(DEFAULT_R0),
            r0: DEFAULT_R0,
            regularization: Regularization {
                weight_decay: DEFAULT_WEIGHT_DECAY,
                dropout: DEFAULT_DROPOUT,
            },
            provenance: Provenance {
                config_hash: String::new(),
                seed: 0,
                generator: crate::GENERATOR.to_string(),
            },
        }
    }
}

pub fn build_static_plan(config: &CurriculumConfig) -> Result<CurriculumPlan, PlanError> {
    if !(0.0..=1.0).contains(&config.r0) {
        return Err(PlanError::InvalidConfig {
            field: "r0",
            reason: "must lie in [0, 1]",
        });
    }
    let reg = config.regularization;
    if !(reg.weight_decay.is_finite() && reg.weight_decay >= 0.0) {
        return Err(PlanError::InvalidConfig {
            field: "weight_decay",
            reason: "must be non-negative",
        });
    }
    if !(0.0..=1.0).contains(&reg.dropout) {
        return Err(PlanError::InvalidConfig {
            field: "dropout",
            reason: "must lie in [0, 1]",
        });
    }
    let stages = config
        .stages
        .iter()
        .map(|s| StagePlan {
            min_hard_ratio: config.r0,
            ..s.clone()
        })
        .collect();
    let plan = CurriculumPlan {
        scale: Scale {
            strategy: Strategy::Cl,
            rho: 1.0,
        },
        stages,
        regularization: reg,
        provenance: config.provenance.clone(),
    };
    plan.validate()?;
    Ok(plan)
}

/// What the pool builder needs to know about one sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolEntry {
    Labeled(DifficultyTier),
    Negative(QualityTier),
}

/// Indices into the entry list the pool was built from.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StagePool {
    pub eligible: Vec<usize>,
    pub hard_pool: Vec<usize>,
}

/// Eligible: labeled samples of an eligible tier plus negatives of an
/// eligible quality. Hard pool: every Hard labeled sample, whatever the stage.
pub fn stage_pool(stage: &StagePlan, entries: &[PoolEntry]) -> StagePool {
    let mut pool = StagePool::default();
    for (i, e) in entries.iter().enumerate() {
        match *e {
            PoolEntry::Labeled(tier) => {
                if stage.eligible_tiers.contains(&tier) {
                    pool.eligible.push(i);
                }
                if tier == DifficultyTier::Hard {
                    pool.hard_pool.push(i);
                }
            }
            PoolEntry::Negative(q) => {
                if stage.eligible_neg_quality.contains(&q) {
                    pool.eligible.push(i);
                }
            }
        }
    }
    pool
}

/// Pool entries for a scored manifest, in manifest order.
pub fn manifest_entries(m: &DatasetManifest, cfg: &ScoringConfig) -> Result<Vec<PoolEntry>, ManifestError> {
    m.slices()
        .iter()
        .map(|s| {
            let tier = slice_tier(s, &cfg.tiers)?;
            if s.has_nodule() {
                Ok(PoolEntry::Labeled(tier))
            } else {
                let q = s.quality.as_ref().ok_or_else(|| ManifestError::MissingQuality {
                    slice_id: s.slice_id.clone(),
                })?;
                Ok(PoolEntry::Negative(quality_tier(q, &cfg.quality)))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_plan_stage_two_and_three() {
        let p = build_static_plan(&CurriculumConfig::default()).unwrap();
        assert_eq!(p.stages.len(), 3);
        assert_eq!(p.stages[1].lr, 0.002);
        assert_eq!(
            p.stages[1].loss,
            LossWeights {
                r#box: 5.0,
                cls: 2.0,
                dfl: 0.5
            }
        );
        assert_eq!(
            p.stages[2].aug,
            AugmentationPolicy {
                rotation_deg: 12.0,
                translate_frac: 0.15,
                scale_frac: 0.30
            }
        );
        assert_eq!(p.total_epochs(), 250);
        assert!(p.stages.iter().all(|s| s.min_hard_ratio == 0.1));
    }

    #[test]
    fn invalid_config_rejected() {
        let mut c = CurriculumConfig::default();
        c.stages[0].epochs = 0;
        assert!(matches!(build_static_plan(&c), Err(PlanError::InvalidStage { stage: 1, .. })));
        let mut c = CurriculumConfig::default();
        c.stages[2].resolution_px = 700;
        assert!(build_static_plan(&c).is_err());
        let mut c = CurriculumConfig::default();
        c.r0 = 1.5;
        assert!(matches!(build_static_plan(&c), Err(PlanError::InvalidConfig { field: "r0", .. })));
    }

    #[test]
    fn stage_one_pool() {
        let p = build_static_plan(&CurriculumConfig::default()).unwrap();
        let entries = [
            PoolEntry::Labeled(DifficultyTier::Easy),
            PoolEntry::Labeled(DifficultyTier::Hard),
            PoolEntry::Negative(QualityTier::High),
        ];
        let pool = stage_pool(&p.stages[0], &entries);
        assert_eq!(pool.eligible, [0, 2]);
        assert_eq!(pool.hard_pool, [1]);
        let all = stage_pool(&p.stages[2], &entries);
        assert_eq!(all.eligible, [0, 1, 2]);
        assert_eq!(stage_pool(&p.stages[0], &[]), StagePool::default());
    }
}
