//! Scale adaptation of a static plan.
//!
//! With `rho` the achieved slice fraction of the training subset:
//!
//! * epochs: `max(rho^beta * E, gamma * E, e_min)`, rounded half away from
//!   zero and never above `E`
//! * hard floor: `r0 + (1 - rho) * delta_r`
//! * learning rate: `eta * (1 - lr_shrink * (1 - rho) * s / S)`, `s` 1-based
//! * weight decay `wd * (2 - rho)`; dropout `min(0.3, p + 0.2 * (1 - rho))`

use serde::{Deserialize, Serialize};

use crate::curriculum::{CurriculumPlan, PlanError, Regularization, Strategy};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaclParams {
    pub beta: f64,
    pub gamma: f64,
    pub e_min: u32,
    pub r0: f64,
    pub delta_r: f64,
    pub lr_shrink: f64,
    pub wd_base: f64,
    pub p_drop_base: f64,
}

impl Default for SaclParams {
    fn default() -> Self {
        Self {
            beta: 0.7,
            gamma: 0.3,
            e_min: 20,
            r0: 0.1,
            delta_r: 0.3,
            lr_shrink: 0.3,
            wd_base: 0.0005,
            p_drop_base: 0.0,
        }
    }
}

const DROPOUT_CAP: f64 = 0.3;
const DROPOUT_SLOPE: f64 = 0.2;

impl SaclParams {
    pub fn validate(&self) -> Result<(), PlanError> {
        let bad = |field, reason| Err(PlanError::InvalidConfig { field, reason });
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return bad("beta", "must lie in (0, 1]");
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma", "must lie in (0, 1)");
        }
        if self.e_min < 1 {
            return bad("e_min", "must be >= 1");
        }
        if !(self.r0 >= 0.0 && self.delta_r >= 0.0 && self.r0 + self.delta_r <= 1.0) {
            return bad("r0/delta_r", "need r0, delta_r >= 0 and r0 + delta_r <= 1");
        }
        if !(0.0..1.0).contains(&self.lr_shrink) {
            return bad("lr_shrink", "must lie in [0, 1)");
        }
        if !(self.wd_base.is_finite() && self.wd_base >= 0.0) {
            return bad("wd_base", "must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.p_drop_base) {
            return bad("p_drop_base", "must lie in [0, 1]");
        }
        Ok(())
    }
}

fn check_rho(rho: f64) -> Result<(), PlanError> {
    if rho > 0.0 && rho <= 1.0 {
        Ok(())
    } else {
        Err(PlanError::BadRho(rho))
    }
}

pub fn adapt_epochs(base_epochs: u32, rho: f64, p: &SaclParams) -> u32 {
    let e = f64::from(base_epochs);
    let scaled = libm::pow(rho, p.beta) * e;
    let raw = scaled.max(p.gamma * e).max(f64::from(p.e_min));
    (libm::round(raw) as u32).min(base_epochs).max(1)
}

pub fn min_hard_ratio(rho: f64, p: &SaclParams) -> f64 {
    p.r0 + (1.0 - rho) * p.delta_r
}

/// `stage` is 1-based, `stages` is the stage count.
pub fn adapt_lr(eta: f64, rho: f64, stage: usize, stages: usize, p: &SaclParams) -> f64 {
    eta * (1.0 - p.lr_shrink * (1.0 - rho) * stage as f64 / stages as f64)
}

pub fn adapt_regularization(rho: f64, p: &SaclParams) -> Regularization {
    Regularization {
        weight_decay: p.wd_base * (2.0 - rho),
        dropout: DROPOUT_CAP.min(p.p_drop_base + DROPOUT_SLOPE * (1.0 - rho)),
    }
}

/// Adapted copy of `static_plan`. Resolution, loss weights, augmentation and
/// eligibility are carried over unchanged.
pub fn build_sacl_plan(static_plan: &CurriculumPlan, rho: f64, p: &SaclParams) -> Result<CurriculumPlan, PlanError> {
    check_rho(rho)?;
    p.validate()?;
    static_plan.validate()?;
    let count = static_plan.stages.len();
    let stages = static_plan
        .stages
        .iter()
        .map(|s| {
            let mut out = s.clone();
            out.epochs = adapt_epochs(s.epochs, rho, p);
            out.lr = adapt_lr(s.lr, rho, s.index, count, p);
            out.min_hard_ratio = min_hard_ratio(rho, p);
            out
        })
        .collect();
    Ok(CurriculumPlan {
        scale: crate::curriculum::Scale {
            strategy: Strategy::Sacl,
            rho,
        },
        stages,
        regularization: adapt_regularization(rho, p),
        provenance: static_plan.provenance.clone(),
    })
}
