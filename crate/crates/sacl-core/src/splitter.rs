//! Patient-level train/val/test partitioning and scale subsets.
//!
//! Patients are shuffled once with the `split` stream and apportioned by
//! largest remainder. Scale subsets shuffle train patients with the `subset`
//! stream, which does not depend on `rho`, so for a fixed seed the subsets
//! for increasing `rho` are nested.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::manifest::DatasetManifest;
use crate::rng::{tags, Stream, PRNG_NAME};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SplitError {
    #[error("need at least 3 patients to split, found {0}")]
    TooFewPatients(usize),
    #[error("split ratios must be non-negative and sum to 1, got {0:?}")]
    BadRatios([f64; 3]),
    #[error("rho must lie in (0, 1], got {0}")]
    BadRho(f64),
    #[error("training set is empty")]
    EmptyTrain,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.8,
            val: 0.1,
            test: 0.1,
        }
    }
}

impl SplitRatios {
    fn as_array(&self) -> [f64; 3] {
        [self.train, self.val, self.test]
    }

    fn validate(&self) -> Result<(), SplitError> {
        let r = self.as_array();
        let ok = r.iter().all(|v| v.is_finite() && *v >= 0.0) && (r.iter().sum::<f64>() - 1.0).abs() < 1e-9;
        if ok {
            Ok(())
        } else {
            Err(SplitError::BadRatios(r))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub seed: u64,
    pub prng: String,
    pub ratios: SplitRatios,
    pub train_patients: Vec<String>,
    pub val_patients: Vec<String>,
    pub test_patients: Vec<String>,
    /// Slice ids per subset, in manifest order.
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

/// Patient counts per subset: largest-remainder apportionment of `n`, ties
/// resolved train, val, test. Each count is within one patient of its target.
pub fn apportion(n: usize, ratios: &SplitRatios) -> [usize; 3] {
    let targets = ratios.as_array().map(|r| r * n as f64);
    let mut counts = targets.map(|t| libm::floor(t) as usize);
    let assigned: usize = counts.iter().sum();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let ra = targets[a] - counts[a] as f64;
        let rb = targets[b] - counts[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

pub fn patient_split(m: &DatasetManifest, ratios: &SplitRatios, seed: u64) -> Result<DatasetSplit, SplitError> {
    ratios.validate()?;
    let mut patients: Vec<&str> = m.patients().into_iter().map(|(p, _)| p).collect();
    if patients.len() < 3 {
        return Err(SplitError::TooFewPatients(patients.len()));
    }
    Stream::new(seed, tags::SPLIT, &[]).shuffle(&mut patients);
    let [n_train, n_val, _] = apportion(patients.len(), ratios);
    let (train_p, rest) = patients.split_at(n_train);
    let (val_p, test_p) = rest.split_at(n_val);

    let owned = |ps: &[&str]| ps.iter().map(|p| p.to_string()).collect::<Vec<_>>();
    let members = |ps: &[&str]| {
        let set: BTreeSet<&str> = ps.iter().copied().collect();
        m.slices()
            .iter()
            .filter(|s| set.contains(s.patient_id.as_str()))
            .map(|s| s.slice_id.clone())
            .collect::<Vec<_>>()
    };
    Ok(DatasetSplit {
        seed,
        prng: PRNG_NAME.to_string(),
        ratios: *ratios,
        train_patients: owned(train_p),
        val_patients: owned(val_p),
        test_patients: owned(test_p),
        train: members(train_p),
        val: members(val_p),
        test: members(test_p),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleSubset {
    pub rho: f64,
    pub achieved_rho: f64,
    pub seed: u64,
    pub prng: String,
    pub patients: Vec<String>,
    pub slice_ids: Vec<String>,
}

/// Patient-closed subset of `train` whose slice fraction is as close to `rho`
/// as the greedy rule allows: take shuffled patients while the running slice
/// count stays within `rho * total`, then take one more if that lands closer.
/// At least one patient is always taken.
pub fn subsample_scale(train: &DatasetManifest, rho: f64, seed: u64) -> Result<ScaleSubset, SplitError> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(SplitError::BadRho(rho));
    }
    if train.is_empty() {
        return Err(SplitError::EmptyTrain);
    }
    let mut patients = train.patients();
    let total = train.len();
    let chosen: Vec<&str> = if rho == 1.0 {
        patients.iter().map(|(p, _)| *p).collect()
    } else {
        Stream::new(seed, tags::SUBSET, &[]).shuffle(&mut patients);
        let target = rho * total as f64;
        let mut taken = 0usize;
        let mut cum = 0usize;
        while taken < patients.len() && (cum + patients[taken].1) as f64 <= target {
            cum += patients[taken].1;
            taken += 1;
        }
        if taken < patients.len() {
            let with_next = (cum + patients[taken].1) as f64;
            if (with_next - target).abs() < (cum as f64 - target).abs() || taken == 0 {
                taken += 1;
            }
        }
        patients[..taken].iter().map(|(p, _)| *p).collect()
    };
    let set: BTreeSet<&str> = chosen.iter().copied().collect();
    let slice_ids: Vec<String> = train
        .slices()
        .iter()
        .filter(|s| set.contains(s.patient_id.as_str()))
        .map(|s| s.slice_id.clone())
        .collect();
    Ok(ScaleSubset {
        rho,
        achieved_rho: slice_ids.len() as f64 / total as f64,
        seed,
        prng: PRNG_NAME.to_string(),
        patients: chosen.iter().map(|p| p.to_string()).collect(),
        slice_ids,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::SliceRecord;
    use alloc::format;
    use alloc::vec;

    fn manifest(counts: &[usize]) -> DatasetManifest {
        let mut slices = Vec::new();
        for (p, &c) in counts.iter().enumerate() {
            for i in 0..c {
                slices.push(SliceRecord::new(&format!("p{p}_s{i}"), &format!("p{p}"), 8, 8, 1.0));
            }
        }
        DatasetManifest::new(slices, "t").unwrap()
    }

    #[test]
    fn ten_patients_split_eight_one_one() {
        let s = patient_split(&manifest(&[3; 10]), &SplitRatios::default(), 7).unwrap();
        assert_eq!(
            (s.train_patients.len(), s.val_patients.len(), s.test_patients.len()),
            (8, 1, 1)
        );
        assert_eq!(s.train.len(), 24);
    }

    #[test]
    fn split_is_deterministic() {
        let m = manifest(&[1, 2, 3, 4, 5, 6, 7]);
        let a = patient_split(&m, &SplitRatios::default(), 42).unwrap();
        let b = patient_split(&m, &SplitRatios::default(), 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn too_few_patients() {
        assert_eq!(
            patient_split(&manifest(&[4, 4]), &SplitRatios::default(), 0),
            Err(SplitError::TooFewPatients(2))
        );
    }

    #[test]
    fn bad_ratios() {
        let r = SplitRatios {
            train: 0.5,
            val: 0.1,
            test: 0.1,
        };
        assert!(matches!(patient_split(&manifest(&[1; 5]), &r, 0), Err(SplitError::BadRatios(_))));
    }

    #[test]
    fn apportion_examples() {
        let r = SplitRatios::default();
        assert_eq!(apportion(10, &r), [8, 1, 1]);
        assert_eq!(apportion(3, &r), [3, 0, 0]);
        assert_eq!(apportion(4, &r), [3, 1, 0]);
        assert_eq!(apportion(15, &r), [12, 2, 1]);
    }

    #[test]
    fn full_scale_is_identity() {
        let m = manifest(&[2, 3, 4]);
        let s = subsample_scale(&m, 1.0, 9).unwrap();
        assert_eq!(s.achieved_rho, 1.0);
        assert_eq!(s.slice_ids.len(), 9);
    }

    #[test]
    fn half_of_four_equal_patients() {
        let s = subsample_scale(&manifest(&[10; 4]), 0.5, 3).unwrap();
        assert_eq!(s.patients.len(), 2);
        assert_eq!(s.achieved_rho, 0.5);
    }

    #[test]
    fn tenth_of_hundred_patients() {
        let s = subsample_scale(&manifest(&[5; 100]), 0.1, 11).unwrap();
        assert_eq!(s.patients.len(), 10);
    }

    #[test]
    fn tiny_rho_still_takes_a_patient() {
        let s = subsample_scale(&manifest(&[50, 50]), 0.01, 0).unwrap();
        assert_eq!(s.patients.len(), 1);
    }

    #[test]
    fn rho_out_of_range() {
        let m = manifest(&[1]);
        assert_eq!(subsample_scale(&m, 0.0, 0), Err(SplitError::BadRho(0.0)));
        assert_eq!(subsample_scale(&m, 1.5, 0), Err(SplitError::BadRho(1.5)));
        assert_eq!(
            subsample_scale(&DatasetManifest::default(), 0.5, 0),
            Err(SplitError::EmptyTrain)
        );
    }

    #[test]
    fn subsets_are_nested() {
        let m = manifest(&[3, 7, 1, 4, 4, 9, 2, 6, 5, 8]);
        let mut prev: Vec<String> = vec![];
        for rho in [0.1, 0.2, 0.5, 1.0] {
            let s = subsample_scale(&m, rho, 5).unwrap();
            assert!(prev.iter().all(|p| s.patients.contains(p)), "rho {rho}");
            prev = s.patients;
        }
    }
}
