//! Executes a plan against a synthetic two-blob problem with a logistic
//! learner, logging every applied hyperparameter, and checks the log
//! against the plan.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::complexity::DifficultyTier;
use crate::curriculum::{stage_pool, CurriculumPlan, PlanError, PoolEntry};
use crate::rng::{tags, Stream};
use crate::sampler::{build_epoch_batches, required_hard, EpochSpec, SampleError};

pub const FEATURE_DIM: usize = 8;
const BLOB_OFFSET: f64 = 1.0;
const SAMPLES_PER_PATIENT: usize = 4;
/// Label-flip quota per tier, indexed Easy, Medium, Hard.
pub const FLIP_RATES: [f64; 3] = [0.0, 0.10, 0.25];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("sample count must be >= 1")]
    NoSamples,
    #[error("tier mix must be non-negative and sum to 1, got {0:?}")]
    BadMix([f64; 3]),
    #[error("stage {stage} has no eligible samples in this dataset")]
    EmptyStage { stage: usize },
    #[error("batch size must be >= 1")]
    ZeroBatch,
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Sample(#[from] SampleError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TierMix {
    pub easy: f64,
    pub medium: f64,
    pub hard: f64,
}

impl Default for TierMix {
    fn default() -> Self {
        Self {
            easy: 0.5,
            medium: 0.3,
            hard: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSample {
    pub features: [f64; FEATURE_DIM],
    pub label: bool,
    pub flipped: bool,
    pub difficulty: DifficultyTier,
    pub patient_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticDataset {
    pub samples: Vec<SyntheticSample>,
    pub seed: u64,
}

fn round_half_away(x: f64) -> usize {
    libm::round(x) as usize
}

fn tier_counts(n: usize, mix: &TierMix) -> [usize; 3] {
    let ratios = crate::splitter::SplitRatios {
        train: mix.easy,
        val: mix.medium,
        test: mix.hard,
    };
    crate::splitter::apportion(n, &ratios)
}

/// Two unit-variance Gaussian blobs at `±1` in every dimension. Tier
/// membership is a shuffled exact apportionment of `mix`; within each tier
/// exactly `round(rate * count)` labels are flipped.
pub fn generate_synthetic_dataset(n: usize, mix: &TierMix, seed: u64) -> Result<SyntheticDataset, SimError> {
    if n == 0 {
        return Err(SimError::NoSamples);
    }
    let m = [mix.easy, mix.medium, mix.hard];
    if !m.iter().all(|v| v.is_finite() && *v >= 0.0) || (m.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(SimError::BadMix(m));
    }
    let counts = tier_counts(n, mix);
    let mut tiers: Vec<DifficultyTier> = DifficultyTier::ALL
        .iter()
        .zip(counts)
        .flat_map(|(&t, c)| core::iter::repeat_n(t, c))
        .collect();
    Stream::new(seed, tags::SYNTH_TIERS, &[]).shuffle(&mut tiers);

    let mut flips = vec![false; n];
    let mut flip_rng = Stream::new(seed, tags::SYNTH_FLIPS, &[]);
    for (t, tier) in DifficultyTier::ALL.iter().enumerate() {
        let mut members: Vec<usize> = (0..n).filter(|&i| tiers[i] == *tier).collect();
        flip_rng.shuffle(&mut members);
        let quota = round_half_away(FLIP_RATES[t] * members.len() as f64);
        for &i in &members[..quota] {
            flips[i] = true;
        }
    }

    let mut feat_rng = Stream::new(seed, tags::SYNTH_FEATURES, &[]);
    let samples = (0..n)
        .map(|i| {
            let truth = i % 2 == 1;
            let centre = if truth { BLOB_OFFSET } else { -BLOB_OFFSET };
            let mut features = [0.0; FEATURE_DIM];
            for f in features.iter_mut() {
                *f = centre + feat_rng.standard_normal();
            }
            SyntheticSample {
                features,
                label: truth != flips[i],
                flipped: flips[i],
                difficulty: tiers[i],
                patient_id: format!("syn{:05}", i / SAMPLES_PER_PATIENT),
            }
        })
        .collect();
    Ok(SyntheticDataset { samples, seed })
}

#[derive(Debug, Clone, PartialEq)]
struct Logistic {
    w: [f64; FEATURE_DIM],
    b: f64,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-z))
}

impl Logistic {
    fn new() -> Self {
        Self {
            w: [0.0; FEATURE_DIM],
            b: 0.0,
        }
    }

    fn prob(&self, x: &[f64; FEATURE_DIM]) -> f64 {
        sigmoid(self.w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + self.b)
    }

    fn loss<'a>(&self, batch: impl Iterator<Item = &'a SyntheticSample>) -> f64 {
        let (mut total, mut n) = (0.0, 0usize);
        for s in batch {
            let p = self.prob(&s.features).clamp(1e-12, 1.0 - 1e-12);
            total -= if s.label { libm::log(p) } else { libm::log(1.0 - p) };
            n += 1;
        }
        total / n as f64
    }

    /// One SGD step on mean cross-entropy plus `wd/2 * |w|^2`.
    fn step(&mut self, batch: &[&SyntheticSample], lr: f64, weight_decay: f64) {
        let mut gw = [0.0; FEATURE_DIM];
        let mut gb = 0.0;
        for s in batch {
            let err = self.prob(&s.features) - if s.label { 1.0 } else { 0.0 };
            for (g, x) in gw.iter_mut().zip(&s.features) {
                *g += err * x;
            }
            gb += err;
        }
        let n = batch.len() as f64;
        for (w, g) in self.w.iter_mut().zip(gw) {
            *w -= lr * (g / n + weight_decay * *w);
        }
        self.b -= lr * gb / n;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRecord {
    pub stage: usize,
    pub epoch: usize,
    pub batch: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub min_hard_ratio: f64,
    pub batch_size: usize,
    pub hard_count: usize,
    pub required_hard: usize,
    pub floor_met: bool,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochSummary {
    pub stage: usize,
    pub epoch: usize,
    pub eligible: usize,
    pub hard_pool: usize,
    pub planned_batches: usize,
    pub requeued: usize,
    pub mean_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub stage: usize,
    pub epochs_executed: u32,
    pub eligible: usize,
    pub hard_pool: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub batch_size: usize,
    pub seed: u64,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub records: Vec<BatchRecord>,
    pub epochs: Vec<EpochSummary>,
    pub stages: Vec<StageSummary>,
    pub warnings: Vec<String>,
}

pub fn run_plan(
    plan: &CurriculumPlan,
    data: &SyntheticDataset,
    batch_size: usize,
    seed: u64,
) -> Result<TrainLog, SimError> {
    plan.validate()?;
    if batch_size == 0 {
        return Err(SimError::ZeroBatch);
    }
    let entries: Vec<PoolEntry> = data.samples.iter().map(|s| PoolEntry::Labeled(s.difficulty)).collect();
    let mut model = Logistic::new();
    let initial_loss = model.loss(data.samples.iter());
    let wd = plan.regularization.weight_decay;
    let mut records = Vec::new();
    let mut epochs = Vec::new();
    let mut stages = Vec::new();
    let mut warnings = Vec::new();

    for stage in &plan.stages {
        let pool = stage_pool(stage, &entries);
        if pool.eligible.is_empty() {
            return Err(SimError::EmptyStage { stage: stage.index });
        }
        if pool.hard_pool.is_empty() && stage.min_hard_ratio > 0.0 {
            warnings.push(format!(
                "stage {}: hard floor {} requested but the dataset has no Hard samples",
                stage.index, stage.min_hard_ratio
            ));
        }
        for epoch in 0..stage.epochs as usize {
            let spec = EpochSpec {
                batch_size,
                r_min: stage.min_hard_ratio,
                seed,
                stage_index: stage.index,
                epoch_index: epoch,
            };
            let bp = build_epoch_batches(&pool.eligible, &pool.hard_pool, spec)?;
            let mut loss_sum = 0.0;
            for (i, batch) in bp.batches.iter().enumerate() {
                let members: Vec<&SyntheticSample> = batch.slice_ids.iter().map(|&j| &data.samples[j]).collect();
                let loss = model.loss(members.iter().copied());
                model.step(&members, stage.lr, wd);
                loss_sum += loss;
                records.push(BatchRecord {
                    stage: stage.index,
                    epoch,
                    batch: i,
                    lr: stage.lr,
                    weight_decay: wd,
                    min_hard_ratio: stage.min_hard_ratio,
                    batch_size: batch.len(),
                    hard_count: batch.hard_count(),
                    required_hard: batch.required_hard,
                    floor_met: batch.floor_met,
                    loss,
                });
            }
            epochs.push(EpochSummary {
                stage: stage.index,
                epoch,
                eligible: pool.eligible.len(),
                hard_pool: pool.hard_pool.len(),
                planned_batches: bp.batches.len(),
                requeued: bp.requeued,
                mean_loss: loss_sum / bp.batches.len() as f64,
            });
        }
        stages.push(StageSummary {
            stage: stage.index,
            epochs_executed: stage.epochs,
            eligible: pool.eligible.len(),
            hard_pool: pool.hard_pool.len(),
        });
    }
    Ok(TrainLog {
        batch_size,
        seed,
        initial_loss,
        final_loss: model.loss(data.samples.iter()),
        records,
        epochs,
        stages,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityCheck {
    pub name: String,
    pub passed: bool,
    pub counterexample: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub checks: Vec<FidelityCheck>,
}

impl FidelityReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&FidelityCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub const CHECK_EPOCHS: &str = "stage_epochs";
pub const CHECK_LR: &str = "learning_rate";
pub const CHECK_FLOOR: &str = "hard_floor";
pub const CHECK_BATCHES: &str = "batch_count";

const REL_TOL: f64 = 1e-12;

fn rel_eq(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= REL_TOL * a.abs().max(b.abs())
}

fn check(name: &str, counterexample: Option<String>) -> FidelityCheck {
    FidelityCheck {
        name: name.into(),
        passed: counterexample.is_none(),
        counterexample,
    }
}

fn check_epochs(log: &TrainLog, plan: &CurriculumPlan) -> Option<String> {
    if log.stages.len() != plan.stages.len() {
        return Some(format!("log has {} stages, plan has {}", log.stages.len(), plan.stages.len()));
    }
    for st in &plan.stages {
        let executed = log.epochs.iter().filter(|e| e.stage == st.index).count();
        let summary = log.stages.iter().find(|s| s.stage == st.index).map(|s| s.epochs_executed);
        if executed != st.epochs as usize || summary != Some(st.epochs) {
            return Some(format!("stage {}: planned {} epochs, executed {executed}", st.index, st.epochs));
        }
    }
    None
}

fn check_lr(log: &TrainLog, plan: &CurriculumPlan) -> Option<String> {
    for r in &log.records {
        let Some(st) = plan.stages.get(r.stage.wrapping_sub(1)) else {
            return Some(format!("batch record references unknown stage {}", r.stage));
        };
        if !rel_eq(r.lr, st.lr) {
            return Some(format!(
                "stage {} epoch {} batch {}: lr {} != planned {}",
                r.stage, r.epoch, r.batch, r.lr, st.lr
            ));
        }
        if !rel_eq(r.weight_decay, plan.regularization.weight_decay) {
            return Some(format!(
                "stage {} epoch {} batch {}: weight decay {} != planned {}",
                r.stage, r.epoch, r.batch, r.weight_decay, plan.regularization.weight_decay
            ));
        }
    }
    None
}

fn check_floor(log: &TrainLog, plan: &CurriculumPlan) -> Option<String> {
    for r in &log.records {
        let Some(st) = plan.stages.get(r.stage.wrapping_sub(1)) else {
            return Some(format!("batch record references unknown stage {}", r.stage));
        };
        if !rel_eq(r.min_hard_ratio, st.min_hard_ratio) {
            return Some(format!(
                "stage {} epoch {} batch {}: floor {} != planned {}",
                r.stage, r.epoch, r.batch, r.min_hard_ratio, st.min_hard_ratio
            ));
        }
        let need = required_hard(st.min_hard_ratio, r.batch_size);
        if r.floor_met && r.hard_count < need {
            return Some(format!(
                "stage {} epoch {} batch {}: {} hard of {} < {need} required",
                r.stage, r.epoch, r.batch, r.hard_count, r.batch_size
            ));
        }
    }
    None
}

fn check_batches(log: &TrainLog, plan: &CurriculumPlan) -> Option<String> {
    let b = log.batch_size.max(1);
    let mut expected_total = 0usize;
    for e in &log.epochs {
        let plain = e.eligible.div_ceil(b);
        if (e.requeued == 0 && e.planned_batches != plain) || e.planned_batches < plain {
            return Some(format!(
                "stage {} epoch {}: {} batches for {} eligible at B={b}",
                e.stage, e.epoch, e.planned_batches, e.eligible
            ));
        }
        let logged = log.records.iter().filter(|r| r.stage == e.stage && r.epoch == e.epoch).count();
        if logged != e.planned_batches {
            return Some(format!(
                "stage {} epoch {}: {logged} batches logged, {} planned",
                e.stage, e.epoch, e.planned_batches
            ));
        }
        expected_total += e.planned_batches;
    }
    let planned_epochs: usize = plan.stages.iter().map(|s| s.epochs as usize).sum();
    if log.epochs.len() != planned_epochs {
        return Some(format!("{} epochs summarised, {planned_epochs} planned", log.epochs.len()));
    }
    if log.records.len() != expected_total {
        return Some(format!("{} batches logged, {expected_total} planned", log.records.len()));
    }
    None
}

/// Checks: stage epoch counts, applied learning rate and weight decay,
/// per-batch hard floor, and batch totals.
pub fn verify_execution(log: &TrainLog, plan: &CurriculumPlan) -> FidelityReport {
    FidelityReport {
        checks: vec![
            check(CHECK_EPOCHS, check_epochs(log, plan)),
            check(CHECK_LR, check_lr(log, plan)),
            check(CHECK_FLOOR, check_floor(log, plan)),
            check(CHECK_BATCHES, check_batches(log, plan)),
        ],
    }
}
