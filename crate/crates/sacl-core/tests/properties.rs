use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use sacl_core::complexity::{complexity_factors, complexity_score, difficulty_tier, ComplexityFactors};
use sacl_core::imagemetrics::{clahe, contrast_stddev, laplacian_variance, quality_tier, ClaheParams};
use sacl_core::manifest::{filter_small_nodules, select_slices};
use sacl_core::sacl::{adapt_epochs, adapt_lr, adapt_regularization, min_hard_ratio};
use sacl_core::sampler::{build_epoch_batches, required_hard, EpochSpec};
use sacl_core::splitter::{patient_split, subsample_scale};
use sacl_core::{DatasetManifest, DifficultyTier, GrayImage, NoduleBox, QualityFeatures, QualityThresholds, QualityTier, SaclParams, ScoringConfig, SliceRecord, SplitRatios, TierThresholds};

fn manifest_from_counts(counts: &[usize]) -> DatasetManifest {
    let mut slices = Vec::new();
    for (p, &c) in counts.iter().enumerate() {
        for i in 0..c {
            slices.push(SliceRecord::new(&format!("p{p}_s{i}"), &format!("p{p}"), 64, 64, 0.7));
        }
    }
    DatasetManifest::new(slices, "prop").unwrap()
}

fn arb_box() -> impl Strategy<Value = NoduleBox> {
    (0u32..40, 0u32..40, 1u32..24, 1u32..24).prop_map(|(x, y, w, h)| NoduleBox {
        x_px: x,
        y_px: y,
        w_px: w,
        h_px: h,
    })
}

fn arb_quality() -> impl Strategy<Value = QualityFeatures> {
    (0.0f64..1500.0, 0.0f64..80.0, 0.0f64..=1.0).prop_map(|(l, c, v)| QualityFeatures {
        laplacian_var: l,
        contrast: c,
        lung_coverage: v,
    })
}

fn arb_slices() -> impl Strategy<Value = DatasetManifest> {
    prop::collection::vec((0usize..6, prop::collection::vec(arb_box(), 0..4), arb_quality(), 0.3f64..1.2), 1..60).prop_map(
        |rows| {
            let slices = rows
                .into_iter()
                .enumerate()
                .map(|(i, (p, boxes, q, spacing))| {
                    let mut s = SliceRecord::new(&format!("s{i:03}"), &format!("p{p}"), 64, 64, spacing);
                    s.boxes = boxes;
                    s.quality = Some(q);
                    s
                })
                .collect();
            DatasetManifest::new(slices, "prop").unwrap()
        },
    )
}

proptest! {
    #[test]
    fn filter_keeps_every_slice(m in arb_slices(), min_mm in 0.0f64..12.0) {
        let f = filter_small_nodules(&m, min_mm);
        prop_assert_eq!(f.len(), m.len());
        for (a, b) in m.slices().iter().zip(f.slices()) {
            prop_assert_eq!(&a.slice_id, &b.slice_id);
            prop_assert!(b.boxes.iter().all(|x| x.diameter_mm(b.spacing_mm) >= min_mm));
            prop_assert!(b.boxes.len() <= a.boxes.len());
        }
    }

    #[test]
    fn selection_ratio_holds(m in arb_slices(), ratio in 0usize..4) {
        let out = select_slices(&m, ratio).unwrap();
        let kept: BTreeSet<&str> = out.slices().iter().map(|s| s.slice_id.as_str()).collect();
        for s in m.slices().iter().filter(|s| s.has_nodule()) {
            prop_assert!(kept.contains(s.slice_id.as_str()));
        }
        let mut per: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
        for s in out.slices() {
            let e = per.entry(s.patient_id.as_str()).or_default();
            if s.has_nodule() { e.0 += 1 } else { e.1 += 1 }
        }
        for (_, (n, bg)) in per {
            prop_assert!(bg <= ratio * n.max(1));
        }
    }

    #[test]
    fn score_is_bounded_and_monotone_in_boxes(m in arb_slices(), extra in arb_box()) {
        let cfg = ScoringConfig::default();
        for s in m.slices() {
            let f = complexity_factors(s, &cfg).unwrap();
            let c = complexity_score(&f);
            prop_assert!((2.0..=11.0).contains(&c));
            let mut more = s.clone();
            more.boxes.push(extra);
            prop_assert!(complexity_factors(&more, &cfg).unwrap().f_cnt >= f.f_cnt);
        }
    }

    #[test]
    fn score_monotone_in_each_factor(i in 0usize..4, base in prop::array::uniform4(0usize..3), bump in 0usize..3) {
        let tables: [&[f64]; 4] = [&[0.5, 1.0, 2.5, 4.0], &[0.5, 1.0, 3.0], &[0.5, 1.0, 2.0], &[0.5, 1.0, 2.0]];
        let pick = |k: [usize; 4]| ComplexityFactors {
            f_cnt: tables[0][k[0].min(3)],
            f_size: tables[1][k[1].min(2)],
            f_shape: tables[2][k[2].min(2)],
            f_qual: tables[3][k[3].min(2)],
        };
        let mut hi = base;
        hi[i] = (hi[i] + bump).min(tables[i].len() - 1);
        prop_assert!(complexity_score(&pick(hi)) >= complexity_score(&pick(base)));
    }

    #[test]
    fn tiers_partition(c in 0.0f64..12.0) {
        let t = TierThresholds::default();
        let tier = difficulty_tier(c, &t);
        let expect = if c <= 4.0 { DifficultyTier::Easy } else if c <= 7.5 { DifficultyTier::Medium } else { DifficultyTier::Hard };
        prop_assert_eq!(tier, expect);
    }

    #[test]
    fn quality_tier_is_total(q in arb_quality()) {
        let t = QualityThresholds::default();
        let tier = quality_tier(&q, &t);
        let high = q.laplacian_var > 500.0 && q.contrast > 30.0;
        let low = q.laplacian_var < 100.0 || q.contrast < 10.0;
        prop_assert!(!(high && low));
        prop_assert_eq!(tier == QualityTier::High, high);
        prop_assert_eq!(tier == QualityTier::Low, low);
    }

    #[test]
    fn metrics_translation_invariant(px in prop::collection::vec(0u8..=200, 64), shift in 0u8..=55) {
        let a = GrayImage::new(8, 8, px.clone()).unwrap();
        let b = GrayImage::new(8, 8, px.iter().map(|p| p + shift).collect()).unwrap();
        prop_assert!((laplacian_variance(&a).unwrap() - laplacian_variance(&b).unwrap()).abs() < 1e-9);
        prop_assert!((contrast_stddev(&a).unwrap() - contrast_stddev(&b).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn clahe_preserves_shape(w in 8usize..40, h in 8usize..40, seed in any::<u64>(), clip in 1.0f64..6.0) {
        let mut s = sacl_core::rng::Stream::new(seed, "clahe", &[]);
        let img = GrayImage::from_fn(w, h, |_, _| s.below(256) as u8);
        let out = clahe(&img, &ClaheParams { clip_limit: clip, tiles: 8 }).unwrap();
        prop_assert_eq!((out.width(), out.height()), (w, h));
    }

    #[test]
    fn epochs_bounded_and_monotone(e in 1u32..400, r1 in 0.001f64..=1.0, r2 in 0.001f64..=1.0) {
        let p = SaclParams::default();
        let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        prop_assert!(adapt_epochs(e, lo, &p) <= adapt_epochs(e, hi, &p));
        prop_assert!(adapt_epochs(e, hi, &p) <= e);
        prop_assert_eq!(adapt_epochs(e, 1.0, &p), e);
        prop_assert!(min_hard_ratio(lo, &p) >= min_hard_ratio(hi, &p));
        prop_assert!((0.1..=0.4 + 1e-12).contains(&min_hard_ratio(lo, &p)));
        prop_assert!(adapt_regularization(lo, &p).dropout <= 0.3);
    }

    #[test]
    fn lr_decreases_with_stage(eta in 1e-5f64..1.0, rho in 0.001f64..0.999) {
        let p = SaclParams::default();
        let lrs: Vec<f64> = (1..=3).map(|s| adapt_lr(eta, rho, s, 3, &p)).collect();
        prop_assert!(lrs[0] > lrs[1] && lrs[1] > lrs[2] && lrs[2] > 0.0);
    }

    #[test]
    fn split_has_no_leakage(counts in prop::collection::vec(1usize..8, 3..40), seed in any::<u64>()) {
        let m = manifest_from_counts(&counts);
        let s = patient_split(&m, &SplitRatios::default(), seed).unwrap();
        let owner: BTreeMap<&str, &str> = m.slices().iter().map(|x| (x.slice_id.as_str(), x.patient_id.as_str())).collect();
        let pats = |ids: &[String]| ids.iter().map(|i| owner[i.as_str()]).collect::<BTreeSet<_>>();
        let (a, b, c) = (pats(&s.train), pats(&s.val), pats(&s.test));
        prop_assert!(a.is_disjoint(&b) && a.is_disjoint(&c) && b.is_disjoint(&c));
        prop_assert_eq!(s.train.len() + s.val.len() + s.test.len(), m.len());
        let n = counts.len() as f64;
        prop_assert!((s.train_patients.len() as f64 - 0.8 * n).abs() <= 1.0);
        prop_assert!((s.val_patients.len() as f64 - 0.1 * n).abs() <= 1.0);
        prop_assert!((s.test_patients.len() as f64 - 0.1 * n).abs() <= 1.0);
    }

    #[test]
    fn subsets_are_closed_and_close(counts in prop::collection::vec(1usize..20, 1..50), rho in 0.01f64..=1.0, seed in any::<u64>()) {
        let m = manifest_from_counts(&counts);
        let s = subsample_scale(&m, rho, seed).unwrap();
        let chosen: BTreeSet<&str> = s.patients.iter().map(String::as_str).collect();
        let expected: usize = m.slices().iter().filter(|x| chosen.contains(x.patient_id.as_str())).count();
        prop_assert_eq!(expected, s.slice_ids.len());
        let max_share = *counts.iter().max().unwrap() as f64 / m.len() as f64;
        prop_assert!((s.achieved_rho - rho).abs() <= max_share + 1e-12);
        prop_assert_eq!(s, subsample_scale(&m, rho, seed).unwrap());
    }

    #[test]
    fn sampler_floor_coverage_uniqueness(
        n_eligible in 1usize..120,
        n_hard in 0usize..40,
        overlap in 0usize..40,
        b in prop::sample::select(vec![1usize, 2, 4, 8, 16]),
        r in prop::sample::select(vec![0.0, 0.1, 0.25, 0.37, 0.5]),
        seed in any::<u64>(),
    ) {
        let eligible: Vec<u32> = (0..n_eligible as u32).collect();
        let overlap = overlap.min(n_eligible);
        let hard: Vec<u32> = (0..overlap as u32).chain(1000..1000 + n_hard as u32).collect();
        let spec = EpochSpec { batch_size: b, r_min: r, seed, stage_index: 2, epoch_index: 3 };
        let plan = build_epoch_batches(&eligible, &hard, spec).unwrap();
        let hard_set: BTreeSet<u32> = hard.iter().copied().collect();
        for batch in &plan.batches {
            prop_assert!(!batch.is_empty() && batch.len() <= b);
            let ids: BTreeSet<u32> = batch.slice_ids.iter().copied().collect();
            prop_assert_eq!(ids.len(), batch.len());
            for (id, flag) in batch.slice_ids.iter().zip(&batch.hard_flags) {
                prop_assert_eq!(hard_set.contains(id), *flag);
            }
            let need = required_hard(r, batch.len());
            if !hard.is_empty() && hard_set.len() >= need && need < b {
                prop_assert!(batch.hard_count() >= need, "{} < {}", batch.hard_count(), need);
            }
        }
        for e in &eligible {
            prop_assert!(plan.batches.iter().any(|x| x.slice_ids.contains(e)));
        }
        prop_assert_eq!(plan.clone(), build_epoch_batches(&eligible, &hard, spec).unwrap());
    }
}
