//! Line-delimited manifest files: one JSON object per slice.

use std::collections::HashSet;
use std::path::Path;

use sacl_core::manifest::{DatasetManifest, ManifestError, SliceRecord};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

const RECORD_FIELDS: &[&str] = &[
    "slice_id",
    "patient_id",
    "image_path",
    "width_px",
    "height_px",
    "spacing_mm",
    "boxes",
    "quality",
    "complexity",
    "factors",
];
const BOX_FIELDS: &[&str] = &["x_px", "y_px", "w_px", "h_px"];
const QUALITY_FIELDS: &[&str] = &["laplacian_var", "contrast", "lung_coverage"];
const FACTOR_FIELDS: &[&str] = &["f_cnt", "f_size", "f_shape", "f_qual"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    /// Unknown fields are an error.
    #[default]
    Strict,
    /// Unknown fields are dropped.
    Lenient,
}

/// Check (strict) or strip (lenient) keys outside `allowed`.
fn police(obj: &mut Map<String, Value>, allowed: &[&str], prefix: &str, mode: ParseMode) -> Result<(), String> {
    let unknown: Vec<String> = obj.keys().filter(|k| !allowed.contains(&k.as_str())).cloned().collect();
    match (mode, unknown.first()) {
        (ParseMode::Strict, Some(k)) => Err(format!("unknown field `{prefix}{k}`")),
        _ => {
            for k in unknown {
                obj.remove(&k);
            }
            Ok(())
        }
    }
}

fn parse_record(text: &str, mode: ParseMode) -> Result<SliceRecord, String> {
    let mut value: Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let obj = value.as_object_mut().ok_or("record is not a JSON object")?;
    police(obj, RECORD_FIELDS, "", mode)?;
    if let Some(Value::Array(boxes)) = obj.get_mut("boxes") {
        for (i, b) in boxes.iter_mut().enumerate() {
            if let Some(b) = b.as_object_mut() {
                police(b, BOX_FIELDS, &format!("boxes[{i}]."), mode)?;
            }
        }
    }
    for (key, allowed) in [("quality", QUALITY_FIELDS), ("factors", FACTOR_FIELDS)] {
        if let Some(Value::Object(inner)) = obj.get_mut(key) {
            police(inner, allowed, &format!("{key}."), mode)?;
        }
    }
    serde_json::from_value(value).map_err(|e| e.to_string())
}

/// Parse manifest text. Line numbers in errors are 1-based; blank lines are
/// skipped.
pub fn parse_manifest(text: &str, mode: ParseMode, source_tag: &str) -> Result<DatasetManifest> {
    let mut slices = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record = parse_record(line, mode).map_err(|message| Error::Record {
            line: line_no,
            source: ManifestError::Malformed { line: line_no, message },
        })?;
        record.validate().map_err(|source| Error::Record { line: line_no, source })?;
        if !seen.insert(record.slice_id.clone()) {
            return Err(Error::Record {
                line: line_no,
                source: ManifestError::DuplicateSliceId {
                    slice_id: record.slice_id,
                },
            });
        }
        slices.push(record);
    }
    Ok(DatasetManifest::new(slices, source_tag)?)
}

pub fn load_manifest(path: &Path, mode: ParseMode) -> Result<DatasetManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text, mode, &path.display().to_string())
}

pub fn render_manifest(m: &DatasetManifest) -> String {
    let mut out = String::new();
    for s in m.slices() {
        out.push_str(&serde_json::to_string(s).expect("slice records always serialize"));
        out.push('\n');
    }
    out
}

pub fn save_manifest(path: &Path, m: &DatasetManifest) -> Result<()> {
    std::fs::write(path, render_manifest(m)).map_err(|e| Error::io(path, e))
}
