//! Per-epoch batch composition with a hard-sample floor.
//!
//! The base stream is the eligible set shuffled by the `sample-base` stream
//! for `(seed, stage, epoch)`. It is cut into batches of `B`. A batch needs
//! `ceil(r_min * len)` members from the hard pool; base members already in the
//! hard pool count first. Any shortfall is drawn from a hard cycle (the hard
//! pool shuffled by `sample-hard`, reshuffled on exhaustion) skipping ids
//! already in the batch. A short final batch grows by appending injections up
//! to `B`; a full batch instead replaces its last non-hard base member, which
//! goes back to the end of the queue so it still appears this epoch. Every
//! batch keeps at least one base member, so the epoch always terminates.

use alloc::collections::{BTreeSet, VecDeque};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{tags, Stream};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SampleError {
    #[error("batch size must be >= 1")]
    ZeroBatch,
    #[error("r_min must lie in [0, 1], got {0}")]
    BadRatio(f64),
    #[error("no eligible samples")]
    EmptyEligible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Batch<T> {
    pub slice_ids: Vec<T>,
    /// Parallel to `slice_ids`: member of the hard pool.
    pub hard_flags: Vec<bool>,
    pub required_hard: usize,
    pub floor_met: bool,
}

impl<T> Batch<T> {
    pub fn len(&self) -> usize {
        self.slice_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slice_ids.is_empty()
    }

    pub fn hard_count(&self) -> usize {
        self.hard_flags.iter().filter(|&&h| h).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchPlan<T> {
    pub stage_index: usize,
    pub epoch_index: usize,
    pub batch_size: usize,
    pub min_hard_ratio: f64,
    /// Base members pushed back to the queue by a replacement.
    pub requeued: usize,
    /// True when at least one batch missed its floor.
    pub floor_unmet: bool,
    pub batches: Vec<Batch<T>>,
}

impl<T> BatchPlan<T> {
    pub fn total_samples(&self) -> usize {
        self.batches.iter().map(Batch::len).sum()
    }
}

/// `ceil(r * len)`, tolerant of representation error in `r * len`.
pub fn required_hard(r_min: f64, len: usize) -> usize {
    let x = r_min * len as f64;
    libm::ceil(x - 1e-9).max(0.0) as usize
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochSpec {
    pub batch_size: usize,
    pub r_min: f64,
    pub seed: u64,
    pub stage_index: usize,
    pub epoch_index: usize,
}

struct HardCycle<T> {
    items: Vec<T>,
    pos: usize,
    rng: Stream,
}

impl<T: Clone + Ord> HardCycle<T> {
    fn new(mut items: Vec<T>, mut rng: Stream) -> Self {
        rng.shuffle(&mut items);
        Self { items, pos: 0, rng }
    }

    fn next(&mut self) -> T {
        if self.pos == self.items.len() {
            self.rng.shuffle(&mut self.items);
            self.pos = 0;
        }
        self.pos += 1;
        self.items[self.pos - 1].clone()
    }

    /// Next candidate not in `batch`. Scanning the rest of the current pass
    /// plus one full pass sees every item, so `None` means all distinct hard
    /// items are already present.
    fn next_distinct(&mut self, batch: &[T]) -> Option<T> {
        let budget = (self.items.len() - self.pos) + self.items.len();
        (0..budget).map(|_| self.next()).find(|c| !batch.contains(c))
    }
}

/// Lazily yields the batches of one epoch. Collecting it gives exactly the
/// [`BatchPlan`] returned by [`build_epoch_batches`].
pub struct EpochBatches<'a, T> {
    spec: EpochSpec,
    hard_set: BTreeSet<&'a T>,
    queue: VecDeque<T>,
    cycle: Option<HardCycle<T>>,
    requeued: usize,
    floor_unmet: bool,
}

impl<'a, T: Clone + Ord> EpochBatches<'a, T> {
    pub fn new(eligible: &[T], hard_pool: &'a [T], spec: EpochSpec) -> Result<Self, SampleError> {
        if spec.batch_size == 0 {
            return Err(SampleError::ZeroBatch);
        }
        if !(0.0..=1.0).contains(&spec.r_min) {
            return Err(SampleError::BadRatio(spec.r_min));
        }
        if eligible.is_empty() {
            return Err(SampleError::EmptyEligible);
        }
        let parts = [spec.stage_index as u64, spec.epoch_index as u64];
        let mut base = eligible.to_vec();
        Stream::new(spec.seed, tags::SAMPLE_BASE, &parts).shuffle(&mut base);

        let mut hard_set = BTreeSet::new();
        let mut unique = Vec::new();
        for h in hard_pool {
            if hard_set.insert(h) {
                unique.push(h.clone());
            }
        }
        let cycle = (!unique.is_empty()).then(|| HardCycle::new(unique, Stream::new(spec.seed, tags::SAMPLE_HARD, &parts)));
        Ok(Self {
            spec,
            hard_set,
            queue: base.into(),
            cycle,
            requeued: 0,
            floor_unmet: false,
        })
    }

    pub fn requeued(&self) -> usize {
        self.requeued
    }

    pub fn floor_unmet(&self) -> bool {
        self.floor_unmet
    }

    fn fill(&mut self, members: &mut Vec<T>, flags: &mut Vec<bool>) -> (usize, bool) {
        let r_min = self.spec.r_min;
        let b = self.spec.batch_size;
        let Some(cycle) = self.cycle.as_mut() else {
            return (0, r_min == 0.0);
        };
        let mut injected = 0usize;
        loop {
            let required = required_hard(r_min, members.len());
            if flags.iter().filter(|&&f| f).count() >= required {
                return (required, true);
            }
            let slot = if members.len() < b {
                None
            } else {
                let base_left = members.len() - injected;
                match flags.iter().rposition(|&f| !f) {
                    Some(i) if base_left > 1 => Some(i),
                    _ => return (required, false),
                }
            };
            let Some(candidate) = cycle.next_distinct(members) else {
                return (required, false);
            };
            match slot {
                None => {
                    members.push(candidate);
                    flags.push(true);
                }
                Some(i) => {
                    let displaced = core::mem::replace(&mut members[i], candidate);
                    flags[i] = true;
                    self.queue.push_back(displaced);
                    self.requeued += 1;
                }
            }
            injected += 1;
        }
    }
}

impl<T: Clone + Ord> Iterator for EpochBatches<'_, T> {
    type Item = Batch<T>;

    fn next(&mut self) -> Option<Batch<T>> {
        if self.queue.is_empty() {
            return None;
        }
        let take = self.spec.batch_size.min(self.queue.len());
        let mut members: Vec<T> = self.queue.drain(..take).collect();
        let mut flags: Vec<bool> = members.iter().map(|m| self.hard_set.contains(m)).collect();
        let (required_hard, floor_met) = self.fill(&mut members, &mut flags);
        self.floor_unmet |= !floor_met;
        Some(Batch {
            slice_ids: members,
            hard_flags: flags,
            required_hard,
            floor_met,
        })
    }
}

pub fn build_epoch_batches<T: Clone + Ord>(
    eligible: &[T],
    hard_pool: &[T],
    spec: EpochSpec,
) -> Result<BatchPlan<T>, SampleError> {
    let mut it = EpochBatches::new(eligible, hard_pool, spec)?;
    let batches: Vec<Batch<T>> = it.by_ref().collect();
    Ok(BatchPlan {
        stage_index: spec.stage_index,
        epoch_index: spec.epoch_index,
        batch_size: spec.batch_size,
        min_hard_ratio: spec.r_min,
        requeued: it.requeued(),
        floor_unmet: it.floor_unmet(),
        batches,
    })
}
