#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sacl_core::imagemetrics::QualityFeatures;
use sacl_core::manifest::{DatasetManifest, NoduleBox, SliceRecord};
use sacl_core::rng::Stream;

/// A scored-ready manifest: every slice carries quality, about a third carry
/// boxes of mixed size and shape.
pub fn fixture_manifest(patients: usize, max_slices: usize, seed: u64) -> DatasetManifest {
    let mut rng = Stream::new(seed, "fixture", &[]);
    let mut slices = Vec::new();
    for p in 0..patients {
        let pid = format!("pat{p:04}");
        let n = 1 + rng.below(max_slices as u64) as usize;
        for s in 0..n {
            let mut r = SliceRecord::new(&format!("{pid}_s{s:03}"), &pid, 512, 512, 0.6 + 0.1 * rng.unit_f64());
            if rng.below(3) == 0 {
                for _ in 0..1 + rng.below(5) {
                    let w = 4 + rng.below(60) as u32;
                    let h = 4 + rng.below(60) as u32;
                    r.boxes.push(NoduleBox {
                        x_px: rng.below(400) as u32,
                        y_px: rng.below(400) as u32,
                        w_px: w,
                        h_px: h,
                    });
                }
            }
            r.quality = Some(QualityFeatures {
                laplacian_var: 1000.0 * rng.unit_f64(),
                contrast: 60.0 * rng.unit_f64(),
                lung_coverage: rng.unit_f64(),
            });
            slices.push(r);
        }
    }
    DatasetManifest::new(slices, "fixture").unwrap()
}

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_sacl"))
}

pub fn sacl(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .current_dir(dir)
        .env_remove("SACL_SEED")
        .output()
        .expect("spawn sacl")
}

pub fn write_fixture(dir: &Path, name: &str, m: &DatasetManifest) -> PathBuf {
    let path = dir.join(name);
    sacl::jsonl::save_manifest(&path, m).unwrap();
    path
}
