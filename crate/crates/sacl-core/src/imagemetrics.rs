//! Per-slice image quality signals and CLAHE.
//!
//! Sharpness is the population variance of the 4-neighbour Laplacian over the
//! valid interior (no padding). Contrast is the population standard deviation
//! of intensities. Lung coverage is the fraction of mask pixels set to 255.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("image is {width}x{height}, need at least {min_width}x{min_height}")]
    TooSmall {
        width: usize,
        height: usize,
        min_width: usize,
        min_height: usize,
    },
    #[error("image is empty")]
    Empty,
    #[error("pixel buffer has {got} bytes, expected {expected}")]
    BufferSize { expected: usize, got: usize },
    #[error("mask is {mask_width}x{mask_height} but image is {width}x{height}")]
    DimensionMismatch {
        width: usize,
        height: usize,
        mask_width: usize,
        mask_height: usize,
    },
    #[error("mask pixel {index} has value {value}; masks must be 0 or 255")]
    NonBinaryMask { index: usize, value: u8 },
    #[error("clip limit {0} must be >= 1")]
    ClipLimit(f64),
    #[error("tile grid must be at least 1x1")]
    NoTiles,
}

/// Row-major 8-bit grayscale raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, MetricsError> {
        let expected = width * height;
        if pixels.len() != expected {
            return Err(MetricsError::BufferSize {
                expected,
                got: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QualityFeatures {
    pub laplacian_var: f64,
    pub contrast: f64,
    pub lung_coverage: f64,
}

impl QualityFeatures {
    /// Name of the first field violating its range, if any.
    pub fn invalid_field(&self) -> Option<&'static str> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.laplacian_var) {
            Some("quality.laplacian_var")
        } else if !ok(self.contrast) {
            Some("quality.contrast")
        } else if !ok(self.lung_coverage) || self.lung_coverage > 1.0 {
            Some("quality.lung_coverage")
        } else {
            None
        }
    }

    /// Ranking key for background selection.
    pub fn composite(&self) -> f64 {
        self.lung_coverage * self.contrast
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum QualityTier {
    High,
    Medium,
    Low,
}

impl QualityTier {
    pub const ALL: [QualityTier; 3] = [QualityTier::High, QualityTier::Medium, QualityTier::Low];
}

/// High requires both signals above the high bounds; Low is triggered by
/// either signal below its low bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityThresholds {
    pub high_laplacian: f64,
    pub high_contrast: f64,
    pub low_laplacian: f64,
    pub low_contrast: f64,
}

impl Default for QualityThresholds {
    fn default() -> Self {
        Self {
            high_laplacian: 500.0,
            high_contrast: 30.0,
            low_laplacian: 100.0,
            low_contrast: 10.0,
        }
    }
}

pub fn quality_tier(q: &QualityFeatures, t: &QualityThresholds) -> QualityTier {
    if q.laplacian_var > t.high_laplacian && q.contrast > t.high_contrast {
        QualityTier::High
    } else if q.laplacian_var < t.low_laplacian || q.contrast < t.low_contrast {
        QualityTier::Low
    } else {
        QualityTier::Medium
    }
}

fn variance_from_sums(n: i128, sum: i128, sum_sq: i128) -> f64 {
    // n^2 * var = n * sum_sq - sum^2, exact in integers
    let scaled = n * sum_sq - sum * sum;
    scaled as f64 / (n * n) as f64
}

pub fn laplacian_variance(img: &GrayImage) -> Result<f64, MetricsError> {
    if img.width < 3 || img.height < 3 {
        return Err(MetricsError::TooSmall {
            width: img.width,
            height: img.height,
            min_width: 3,
            min_height: 3,
        });
    }
    let (mut sum, mut sum_sq) = (0i128, 0i128);
    for y in 1..img.height - 1 {
        for x in 1..img.width - 1 {
            let r = i32::from(img.get(x - 1, y))
                + i32::from(img.get(x + 1, y))
                + i32::from(img.get(x, y - 1))
                + i32::from(img.get(x, y + 1))
                - 4 * i32::from(img.get(x, y));
            sum += i128::from(r);
            sum_sq += i128::from(r) * i128::from(r);
        }
    }
    let n = ((img.width - 2) * (img.height - 2)) as i128;
    Ok(variance_from_sums(n, sum, sum_sq))
}

pub fn contrast_stddev(img: &GrayImage) -> Result<f64, MetricsError> {
    if img.pixels.is_empty() {
        return Err(MetricsError::Empty);
    }
    let (sum, sum_sq) = img.pixels.iter().fold((0i128, 0i128), |(s, q), &p| {
        let p = i128::from(p);
        (s + p, q + p * p)
    });
    Ok(libm::sqrt(variance_from_sums(img.pixels.len() as i128, sum, sum_sq)))
}

pub fn lung_coverage(img: &GrayImage, mask: &GrayImage) -> Result<f64, MetricsError> {
    if img.width != mask.width || img.height != mask.height {
        return Err(MetricsError::DimensionMismatch {
            width: img.width,
            height: img.height,
            mask_width: mask.width,
            mask_height: mask.height,
        });
    }
    if mask.pixels.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut inside = 0usize;
    for (index, &value) in mask.pixels.iter().enumerate() {
        match value {
            255 => inside += 1,
            0 => {}
            _ => return Err(MetricsError::NonBinaryMask { index, value }),
        }
    }
    Ok(inside as f64 / mask.pixels.len() as f64)
}

/// All three quality signals for one slice.
pub fn assess_quality(img: &GrayImage, mask: &GrayImage) -> Result<QualityFeatures, MetricsError> {
    Ok(QualityFeatures {
        laplacian_var: laplacian_variance(img)?,
        contrast: contrast_stddev(img)?,
        lung_coverage: lung_coverage(img, mask)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClaheParams {
    pub clip_limit: f64,
    pub tiles: usize,
}

impl Default for ClaheParams {
    fn default() -> Self {
        Self {
            clip_limit: 2.0,
            tiles: 8,
        }
    }
}

/// Tile boundaries along one axis: `tiles + 1` offsets, `b[i] = i * len / tiles`.
pub fn tile_bounds(len: usize, tiles: usize) -> Vec<usize> {
    (0..=tiles).map(|i| i * len / tiles).collect()
}

/// Clipped tile histogram: every bin is cut at `clip_limit * n / 256` and the
/// removed mass is spread evenly over all 256 bins. Total mass is preserved.
pub fn clip_histogram(hist: &[u32; 256], clip_limit: f64) -> [f64; 256] {
    let n: u64 = hist.iter().map(|&c| u64::from(c)).sum();
    let limit = clip_limit * n as f64 / 256.0;
    let mut out = [0.0f64; 256];
    let mut excess = 0.0;
    for (o, &c) in out.iter_mut().zip(hist) {
        let c = f64::from(c);
        if c > limit {
            excess += c - limit;
            *o = limit;
        } else {
            *o = c;
        }
    }
    let share = excess / 256.0;
    for o in out.iter_mut() {
        *o += share;
    }
    out
}

fn equalization_lut(clipped: &[f64; 256]) -> [u8; 256] {
    let total: f64 = clipped.iter().sum();
    let mut lut = [0u8; 256];
    if total <= 0.0 {
        return lut;
    }
    let mut cdf = 0.0;
    for (entry, &c) in lut.iter_mut().zip(clipped) {
        cdf += c;
        *entry = libm::round(255.0 * cdf / total).clamp(0.0, 255.0) as u8;
    }
    lut
}

/// Per-tile lookup tables, row-major over the tile grid.
pub fn clahe_tile_luts(img: &GrayImage, params: &ClaheParams) -> Result<Vec<[u8; 256]>, MetricsError> {
    check_clahe(img, params)?;
    let xs = tile_bounds(img.width, params.tiles);
    let ys = tile_bounds(img.height, params.tiles);
    let mut luts = Vec::with_capacity(params.tiles * params.tiles);
    for ty in 0..params.tiles {
        for tx in 0..params.tiles {
            let mut hist = [0u32; 256];
            for y in ys[ty]..ys[ty + 1] {
                for &p in &img.pixels[y * img.width + xs[tx]..y * img.width + xs[tx + 1]] {
                    hist[usize::from(p)] += 1;
                }
            }
            luts.push(equalization_lut(&clip_histogram(&hist, params.clip_limit)));
        }
    }
    Ok(luts)
}

fn check_clahe(img: &GrayImage, params: &ClaheParams) -> Result<(), MetricsError> {
    if params.tiles == 0 {
        return Err(MetricsError::NoTiles);
    }
    if !(params.clip_limit >= 1.0) {
        return Err(MetricsError::ClipLimit(params.clip_limit));
    }
    if img.width < params.tiles || img.height < params.tiles {
        return Err(MetricsError::TooSmall {
            width: img.width,
            height: img.height,
            min_width: params.tiles,
            min_height: params.tiles,
        });
    }
    Ok(())
}

/// For each coordinate along an axis: the two neighbouring tile indices and
/// the weight of the second one. Outside the outermost centres the nearest
/// tile is used alone.
fn axis_weights(len: usize, tiles: usize) -> Vec<(usize, usize, f64)> {
    let bounds = tile_bounds(len, tiles);
    let centres: Vec<f64> = bounds
        .windows(2)
        .map(|w| (w[0] + w[1]) as f64 / 2.0 - 0.5)
        .collect();
    (0..len)
        .map(|p| {
            let p = p as f64;
            if p <= centres[0] {
                return (0, 0, 0.0);
            }
            if p >= centres[tiles - 1] {
                return (tiles - 1, tiles - 1, 0.0);
            }
            let i = centres.partition_point(|&c| c <= p) - 1;
            let w = (p - centres[i]) / (centres[i + 1] - centres[i]);
            (i, i + 1, w)
        })
        .collect()
}

/// Contrast-limited adaptive histogram equalization with bilinear blending of
/// the per-tile mappings between tile centres.
pub fn clahe(img: &GrayImage, params: &ClaheParams) -> Result<GrayImage, MetricsError> {
    let luts = clahe_tile_luts(img, params)?;
    let t = params.tiles;
    let wx = axis_weights(img.width, t);
    let wy = axis_weights(img.height, t);
    let mut out = Vec::with_capacity(img.pixels.len());
    for (y, &(y0, y1, fy)) in wy.iter().enumerate() {
        for (x, &(x0, x1, fx)) in wx.iter().enumerate() {
            let v = usize::from(img.get(x, y));
            let at = |ty: usize, tx: usize| f64::from(luts[ty * t + tx][v]);
            let top = at(y0, x0) * (1.0 - fx) + at(y0, x1) * fx;
            let bottom = at(y1, x0) * (1.0 - fx) + at(y1, x1) * fx;
            let blended = top * (1.0 - fy) + bottom * fy;
            out.push(libm::round(blended).clamp(0.0, 255.0) as u8);
        }
    }
    Ok(GrayImage {
        width: img.width,
        height: img.height,
        pixels: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_laplacian(img: &GrayImage) -> f64 {
        let mut r = Vec::new();
        for y in 1..img.height() - 1 {
            for x in 1..img.width() - 1 {
                let k = [[0, 1, 0], [1, -4, 1], [0, 1, 0]];
                let mut acc = 0.0;
                for (dy, row) in k.iter().enumerate() {
                    for (dx, w) in row.iter().enumerate() {
                        acc += f64::from(*w) * f64::from(img.get(x + dx - 1, y + dy - 1));
                    }
                }
                r.push(acc);
            }
        }
        let mean = r.iter().sum::<f64>() / r.len() as f64;
        r.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / r.len() as f64
    }

    #[test]
    fn constant_image_has_zero_sharpness_and_contrast() {
        let img = GrayImage::filled(9, 7, 128);
        assert_eq!(laplacian_variance(&img).unwrap(), 0.0);
        assert_eq!(contrast_stddev(&img).unwrap(), 0.0);
    }

    #[test]
    fn impulse_matches_direct_convolution() {
        let img = GrayImage::from_fn(5, 5, |x, y| if (x, y) == (2, 2) { 255 } else { 0 });
        // responses: centre -1020, four edge neighbours +255, four corners 0
        let expected = {
            let r = [-1020.0, 255.0, 255.0, 255.0, 255.0, 0.0, 0.0, 0.0, 0.0];
            let mean: f64 = r.iter().sum::<f64>() / 9.0;
            r.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 9.0
        };
        assert!((laplacian_variance(&img).unwrap() - expected).abs() < 1e-9);
        assert!((brute_laplacian(&img) - expected).abs() < 1e-9);
    }

    #[test]
    fn checkerboard_closed_form() {
        let img = GrayImage::from_fn(6, 6, |x, y| if (x + y) % 2 == 0 { 0 } else { 255 });
        assert_eq!(laplacian_variance(&img).unwrap(), 1020.0 * 1020.0);
    }

    #[test]
    fn too_small_for_laplacian() {
        let img = GrayImage::filled(2, 5, 0);
        assert!(matches!(laplacian_variance(&img), Err(MetricsError::TooSmall { .. })));
    }

    #[test]
    fn contrast_examples() {
        let half = GrayImage::from_fn(4, 2, |x, _| if x < 2 { 0 } else { 255 });
        assert_eq!(contrast_stddev(&half).unwrap(), 127.5);
        let pair = GrayImage::new(2, 1, vec![0, 10]).unwrap();
        assert_eq!(contrast_stddev(&pair).unwrap(), 5.0);
        let empty = GrayImage::new(0, 0, vec![]).unwrap();
        assert_eq!(contrast_stddev(&empty), Err(MetricsError::Empty));
    }

    #[test]
    fn coverage_examples() {
        let img = GrayImage::filled(2, 2, 10);
        assert_eq!(lung_coverage(&img, &GrayImage::filled(2, 2, 255)).unwrap(), 1.0);
        assert_eq!(lung_coverage(&img, &GrayImage::filled(2, 2, 0)).unwrap(), 0.0);
        let one = GrayImage::new(2, 2, vec![0, 255, 0, 0]).unwrap();
        assert_eq!(lung_coverage(&img, &one).unwrap(), 0.25);
        let bad = GrayImage::new(2, 2, vec![0, 17, 0, 0]).unwrap();
        assert_eq!(
            lung_coverage(&img, &bad),
            Err(MetricsError::NonBinaryMask { index: 1, value: 17 })
        );
        assert!(matches!(
            lung_coverage(&img, &GrayImage::filled(3, 2, 0)),
            Err(MetricsError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn tier_examples() {
        let t = QualityThresholds::default();
        let q = |l, c| QualityFeatures {
            laplacian_var: l,
            contrast: c,
            lung_coverage: 0.5,
        };
        assert_eq!(quality_tier(&q(600.0, 35.0), &t), QualityTier::High);
        assert_eq!(quality_tier(&q(50.0, 40.0), &t), QualityTier::Low);
        assert_eq!(quality_tier(&q(300.0, 20.0), &t), QualityTier::Medium);
        // strict inequality at the High bounds
        assert_eq!(quality_tier(&q(500.0, 35.0), &t), QualityTier::Medium);
        assert_eq!(quality_tier(&q(600.0, 9.0), &t), QualityTier::Low);
    }

    #[test]
    fn clahe_constant_image_stays_constant() {
        let img = GrayImage::filled(32, 24, 77);
        let out = clahe(&img, &ClaheParams::default()).unwrap();
        let first = out.pixels()[0];
        assert!(out.pixels().iter().all(|&p| p == first));
    }

    #[test]
    fn clahe_keeps_dimensions_and_rejects_bad_params() {
        let img = GrayImage::from_fn(37, 19, |x, y| ((x * 7 + y * 13) % 256) as u8);
        let out = clahe(&img, &ClaheParams::default()).unwrap();
        assert_eq!((out.width(), out.height()), (37, 19));
        let small = GrayImage::filled(7, 20, 0);
        assert!(matches!(
            clahe(&small, &ClaheParams::default()),
            Err(MetricsError::TooSmall { .. })
        ));
        let p = ClaheParams {
            clip_limit: 0.5,
            tiles: 2,
        };
        assert_eq!(clahe(&img, &p), Err(MetricsError::ClipLimit(0.5)));
    }

    #[test]
    fn clip_preserves_mass() {
        let mut hist = [0u32; 256];
        hist[10] = 900;
        hist[200] = 124;
        let c = clip_histogram(&hist, 2.0);
        let limit = 2.0 * 1024.0 / 256.0;
        assert!((c.iter().sum::<f64>() - 1024.0).abs() < 1e-9);
        let share = (900.0 - limit + 124.0 - limit) / 256.0;
        assert!((c[10] - (limit + share)).abs() < 1e-9);
        assert!((c[0] - share).abs() < 1e-9);
    }

    #[test]
    fn tile_bounds_cover_axis() {
        assert_eq!(tile_bounds(20, 8), vec![0, 2, 5, 7, 10, 12, 15, 17, 20]);
    }
}
