//! Slice records and the manifest-level filters applied before scoring.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::complexity::ComplexityFactors;
use crate::imagemetrics::QualityFeatures;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ManifestError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("duplicate slice_id {slice_id:?}")]
    DuplicateSliceId { slice_id: String },
    #[error("slice {slice_id:?}: invalid {field}: {reason}")]
    InvalidField {
        slice_id: String,
        field: String,
        reason: String,
    },
    #[error("slice {slice_id:?}: box {index} lies outside the {width}x{height} image")]
    BoxOutOfBounds {
        slice_id: String,
        index: usize,
        width: u32,
        height: u32,
    },
    #[error("slice {slice_id:?}: quality features missing")]
    MissingQuality { slice_id: String },
    #[error("slice {slice_id:?}: no complexity score")]
    Unscored { slice_id: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoduleBox {
    pub x_px: u32,
    pub y_px: u32,
    pub w_px: u32,
    pub h_px: u32,
}

impl NoduleBox {
    pub fn area(&self) -> u64 {
        u64::from(self.w_px) * u64::from(self.h_px)
    }

    /// Longest side in millimetres, used as the diameter proxy.
    pub fn diameter_mm(&self, spacing_mm: f64) -> f64 {
        f64::from(self.w_px.max(self.h_px)) * spacing_mm
    }

    /// `max(w/h, h/w)`; 1.0 for a square box.
    pub fn aspect_ratio(&self) -> f64 {
        let (w, h) = (f64::from(self.w_px), f64::from(self.h_px));
        (w / h).max(h / w)
    }

    fn fits(&self, width: u32, height: u32) -> bool {
        u64::from(self.x_px) + u64::from(self.w_px) <= u64::from(width)
            && u64::from(self.y_px) + u64::from(self.h_px) <= u64::from(height)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceRecord {
    pub slice_id: String,
    pub patient_id: String,
    pub image_path: String,
    pub width_px: u32,
    pub height_px: u32,
    pub spacing_mm: f64,
    pub boxes: Vec<NoduleBox>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quality: Option<QualityFeatures>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub complexity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factors: Option<ComplexityFactors>,
}

impl SliceRecord {
    pub fn new(slice_id: &str, patient_id: &str, width_px: u32, height_px: u32, spacing_mm: f64) -> Self {
        Self {
            slice_id: slice_id.to_string(),
            patient_id: patient_id.to_string(),
            image_path: alloc::format!("{patient_id}/{slice_id}.png"),
            width_px,
            height_px,
            spacing_mm,
            boxes: Vec::new(),
            quality: None,
            complexity: None,
            factors: None,
        }
    }

    pub fn has_nodule(&self) -> bool {
        !self.boxes.is_empty()
    }

    pub fn validate(&self) -> Result<(), ManifestError> {
        let invalid = |field: &str, reason: &str| ManifestError::InvalidField {
            slice_id: self.slice_id.clone(),
            field: field.to_string(),
            reason: reason.to_string(),
        };
        if !(self.spacing_mm.is_finite() && self.spacing_mm > 0.0) {
            return Err(invalid("spacing_mm", "must be positive"));
        }
        for (index, b) in self.boxes.iter().enumerate() {
            if b.w_px == 0 {
                return Err(invalid(&alloc::format!("boxes[{index}].w_px"), "must be > 0"));
            }
            if b.h_px == 0 {
                return Err(invalid(&alloc::format!("boxes[{index}].h_px"), "must be > 0"));
            }
            if !b.fits(self.width_px, self.height_px) {
                return Err(ManifestError::BoxOutOfBounds {
                    slice_id: self.slice_id.clone(),
                    index,
                    width: self.width_px,
                    height: self.height_px,
                });
            }
        }
        if let Some(field) = self.quality.as_ref().and_then(QualityFeatures::invalid_field) {
            return Err(invalid(field, "out of range"));
        }
        if let Some(c) = self.complexity {
            if !(c.is_finite() && c >= 0.0) {
                return Err(invalid("complexity", "must be non-negative"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetManifest {
    slices: Vec<SliceRecord>,
    pub source_tag: String,
}

impl DatasetManifest {
    /// Validates every record and rejects duplicate ids.
    pub fn new(slices: Vec<SliceRecord>, source_tag: impl Into<String>) -> Result<Self, ManifestError> {
        let mut seen = BTreeSet::new();
        for s in &slices {
            s.validate()?;
            if !seen.insert(s.slice_id.as_str()) {
                return Err(ManifestError::DuplicateSliceId {
                    slice_id: s.slice_id.clone(),
                });
            }
        }
        Ok(Self {
            slices,
            source_tag: source_tag.into(),
        })
    }

    pub fn slices(&self) -> &[SliceRecord] {
        &self.slices
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    pub fn into_slices(self) -> Vec<SliceRecord> {
        self.slices
    }

    /// Same records, each passed through `f`. Ids are not re-checked, so `f`
    /// must not touch `slice_id`.
    pub fn map_slices(&self, mut f: impl FnMut(&SliceRecord) -> SliceRecord) -> Self {
        Self {
            slices: self.slices.iter().map(&mut f).collect(),
            source_tag: self.source_tag.clone(),
        }
    }

    /// Records whose id is in `ids`, in manifest order.
    pub fn restrict<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> Self {
        let keep: BTreeSet<&str> = ids.into_iter().collect();
        Self {
            slices: self
                .slices
                .iter()
                .filter(|s| keep.contains(s.slice_id.as_str()))
                .cloned()
                .collect(),
            source_tag: self.source_tag.clone(),
        }
    }

    /// Patients in order of first appearance, with their slice counts.
    pub fn patients(&self) -> Vec<(&str, usize)> {
        let mut order: Vec<(&str, usize)> = Vec::new();
        let mut index: BTreeMap<&str, usize> = BTreeMap::new();
        for s in &self.slices {
            match index.get(s.patient_id.as_str()) {
                Some(&i) => order[i].1 += 1,
                None => {
                    index.insert(s.patient_id.as_str(), order.len());
                    order.push((s.patient_id.as_str(), 1));
                }
            }
        }
        order
    }
}

pub const DEFAULT_MIN_DIAMETER_MM: f64 = 3.0;
pub const DEFAULT_BG_RATIO: usize = 2;

/// Drop boxes whose diameter proxy is below `min_diameter_mm`. Slices are
/// always kept; a slice that loses all its boxes becomes a negative.
pub fn filter_small_nodules(m: &DatasetManifest, min_diameter_mm: f64) -> DatasetManifest {
    m.map_slices(|s| {
        let mut out = s.clone();
        out.boxes.retain(|b| b.diameter_mm(s.spacing_mm) >= min_diameter_mm);
        if out.boxes.len() != s.boxes.len() {
            // earlier scores described the removed boxes
            out.complexity = None;
            out.factors = None;
        }
        out
    })
}

/// Keep every nodule slice, and per patient the best `bg_ratio * max(n, 1)`
/// background slices where `n` is that patient's nodule-slice count. Ranked by
/// descending `lung_coverage * contrast`, ties by ascending slice id. Output
/// keeps manifest order.
pub fn select_slices(m: &DatasetManifest, bg_ratio: usize) -> Result<DatasetManifest, ManifestError> {
    let mut nodule_slices: BTreeMap<&str, usize> = BTreeMap::new();
    let mut backgrounds: BTreeMap<&str, Vec<(f64, &str)>> = BTreeMap::new();
    for s in m.slices() {
        let q = s.quality.as_ref().ok_or_else(|| ManifestError::MissingQuality {
            slice_id: s.slice_id.clone(),
        })?;
        if s.has_nodule() {
            *nodule_slices.entry(&s.patient_id).or_default() += 1;
        } else {
            backgrounds
                .entry(&s.patient_id)
                .or_default()
                .push((q.composite(), &s.slice_id));
        }
    }
    let mut kept_bg: BTreeSet<&str> = BTreeSet::new();
    for (patient, mut ranked) in backgrounds {
        let n = nodule_slices.get(patient).copied().unwrap_or(0);
        let cap = bg_ratio * n.max(1);
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
        kept_bg.extend(ranked.into_iter().take(cap).map(|(_, id)| id));
    }
    let slices = m
        .slices()
        .iter()
        .filter(|s| s.has_nodule() || kept_bg.contains(s.slice_id.as_str()))
        .cloned()
        .collect();
    Ok(DatasetManifest {
        slices,
        source_tag: m.source_tag.clone(),
    })
}
