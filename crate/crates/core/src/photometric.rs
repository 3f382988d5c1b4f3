//! Photometric consistency between a source view warped by its scene
//! coordinates and the target view.

use crate::error::{Error, Result};
use crate::geometry::Pose;
use crate::simulator::SyntheticImagePair;

const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;
/// Minimum share of valid pixels before the loss is considered meaningless.
const MIN_VALID_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotometricLoss {
    /// `l1 + ssim`.
    pub total: f64,
    /// (Weighted) mean absolute difference over valid pixels.
    pub l1: f64,
    /// `(1 − mean SSIM) / 2` over pixels whose 3×3 window is fully valid.
    pub ssim: f64,
    pub valid_pixels: usize,
}

/// Samples the target image at the projections of the source scene
/// coordinates under `pose_t`. Returns the warped value per source pixel,
/// `None` where the projection is behind the camera or off the image.
pub fn warp_source(pair: &SyntheticImagePair, pose_t: &Pose) -> Vec<Option<f64>> {
    pair.source_coords
        .iter()
        .map(|s| {
            pair.intrinsics
                .project(&pose_t.transform_point(s))
                .and_then(|q| pair.target_image.sample(q.x, q.y))
        })
        .collect()
}

/// L1 + SSIM loss of the source view against the target view resampled
/// with `pose_t`. `weights_mask`, when given, weights the L1 mean per
/// source pixel.
pub fn photometric_loss(
    pair: &SyntheticImagePair,
    pose_t: &Pose,
    weights_mask: Option<&[f64]>,
) -> Result<PhotometricLoss> {
    let (w, h) = (pair.source_image.width, pair.source_image.height);
    if let Some(mask) = weights_mask {
        if mask.len() != w * h {
            return Err(Error::DimensionMismatch {
                expected: w * h,
                got: mask.len(),
            });
        }
    }
    let warped = warp_source(pair, pose_t);
    let source = &pair.source_image.data;

    let mut valid_pixels = 0usize;
    let mut l1_sum = 0.0;
    let mut weight_sum = 0.0;
    for (i, value) in warped.iter().enumerate() {
        if let Some(v) = value {
            valid_pixels += 1;
            let weight = weights_mask.map_or(1.0, |m| m[i]);
            l1_sum += weight * (v - source[i]).abs();
            weight_sum += weight;
        }
    }
    if (valid_pixels as f64) < MIN_VALID_FRACTION * (w * h) as f64 || valid_pixels == 0 {
        return Err(Error::NoOverlap {
            percent: 100.0 * valid_pixels as f64 / (w * h) as f64,
        });
    }
    let l1 = if weight_sum > 0.0 { l1_sum / weight_sum } else { 0.0 };

    let mut ssim_sum = 0.0;
    let mut ssim_count = 0usize;
    for y in 1..h.saturating_sub(1) {
        'pixel: for x in 1..w.saturating_sub(1) {
            let mut a = [0.0; 9];
            let mut b = [0.0; 9];
            let mut k = 0;
            for dy in 0..3 {
                for dx in 0..3 {
                    let idx = (y + dy - 1) * w + (x + dx - 1);
                    match warped[idx] {
                        Some(v) => {
                            a[k] = source[idx];
                            b[k] = v;
                        }
                        None => continue 'pixel,
                    }
                    k += 1;
                }
            }
            ssim_sum += ssim_window(&a, &b);
            ssim_count += 1;
        }
    }
    let ssim = if ssim_count > 0 {
        (1.0 - ssim_sum / ssim_count as f64) / 2.0
    } else {
        0.0
    };

    Ok(PhotometricLoss {
        total: l1 + ssim,
        l1,
        ssim,
        valid_pixels,
    })
}

/// SSIM of two 3×3 patches with a box window.
fn ssim_window(a: &[f64; 9], b: &[f64; 9]) -> f64 {
    let n = 9.0;
    let mu_a = a.iter().sum::<f64>() / n;
    let mu_b = b.iter().sum::<f64>() / n;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    let mut cov = 0.0;
    for (x, y) in a.iter().zip(b) {
        let (da, db) = (x - mu_a, y - mu_b);
        var_a += da * da;
        var_b += db * db;
        cov += da * db;
    }
    var_a /= n;
    var_b /= n;
    cov /= n;
    ((2.0 * mu_a * mu_b + SSIM_C1) * (2.0 * cov + SSIM_C2))
        / ((mu_a * mu_a + mu_b * mu_b + SSIM_C1) * (var_a + var_b + SSIM_C2))
}
