//! Pose metrics and batch summaries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{rotation_angle, Pose};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseError {
    /// Distance between camera centers (meters).
    pub translation_error: f64,
    /// Angle of `R_estᵀ R_gt` (degrees).
    pub rotation_error: f64,
}

pub fn pose_error(est: &Pose, gt: &Pose) -> PoseError {
    PoseError {
        translation_error: (est.camera_center() - gt.camera_center()).norm(),
        rotation_error: rotation_angle(&(est.rotation().transpose() * gt.rotation())).to_degrees(),
    }
}

/// Fraction of frames with both errors strictly below the thresholds.
pub fn recall(errors: &[PoseError], t_thresh: f64, r_thresh: f64) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::Empty("pose errors"));
    }
    let hits = errors
        .iter()
        .filter(|e| e.translation_error < t_thresh && e.rotation_error < r_thresh)
        .count();
    Ok(hits as f64 / errors.len() as f64)
}

pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.len() < 3 {
        return Err(Error::InvalidParameter(format!("correlation needs N ≥ 3, got {}", a.len())));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::UndefinedCorrelation);
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Pearson correlation between weights and `1/(1 + r)`; infinite errors
/// (points behind the camera) map to 0.
pub fn weight_interpretability(w: &[f64], reproj_errors: &[f64]) -> Result<f64> {
    let inverse: Vec<f64> = reproj_errors.iter().map(|&r| 1.0 / (1.0 + r)).collect();
    pearson(w, &inverse)
}

/// Probability that a random inlier outranks a random outlier (ties count
/// half).
pub fn ranking_auc(weights: &[f64], outlier_mask: &[bool]) -> Result<f64> {
    if weights.len() != outlier_mask.len() {
        return Err(Error::DimensionMismatch {
            expected: weights.len(),
            got: outlier_mask.len(),
        });
    }
    let inliers: Vec<f64> = weights.iter().zip(outlier_mask).filter(|(_, &o)| !o).map(|(w, _)| *w).collect();
    let outliers: Vec<f64> = weights.iter().zip(outlier_mask).filter(|(_, &o)| o).map(|(w, _)| *w).collect();
    if inliers.is_empty() || outliers.is_empty() {
        return Err(Error::Empty("inlier or outlier class"));
    }
    let mut score = 0.0;
    for a in &inliers {
        for b in &outliers {
            score += if a > b {
                1.0
            } else if a == b {
                0.5
            } else {
                0.0
            };
        }
    }
    Ok(score / (inliers.len() * outliers.len()) as f64)
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len().is_multiple_of(2) { (v[mid - 1] + v[mid]) / 2.0 } else { v[mid] })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEval {
    pub frame: String,
    pub translation_error_m: f64,
    pub rotation_error_deg: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pearson: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub frames: usize,
    pub median_translation_error_m: f64,
    pub median_rotation_error_deg: f64,
    /// Recall at 5 cm / 5°.
    pub recall_5cm_5deg: f64,
    /// Median per-frame Pearson coefficient, when weights were supplied.
    pub pearson: Option<f64>,
    pub per_frame: Vec<FrameEval>,
}

pub fn summarize(per_frame: Vec<FrameEval>) -> Result<EvalSummary> {
    let errors: Vec<PoseError> = per_frame
        .iter()
        .map(|f| PoseError {
            translation_error: f.translation_error_m,
            rotation_error: f.rotation_error_deg,
        })
        .collect();
    let recall = recall(&errors, 0.05, 5.0)?;
    let t: Vec<f64> = errors.iter().map(|e| e.translation_error).collect();
    let r: Vec<f64> = errors.iter().map(|e| e.rotation_error).collect();
    let pearsons: Vec<f64> = per_frame.iter().filter_map(|f| f.pearson).collect();
    Ok(EvalSummary {
        frames: per_frame.len(),
        median_translation_error_m: median(&t).expect("non-empty"),
        median_rotation_error_deg: median(&r).expect("non-empty"),
        recall_5cm_5deg: recall,
        pearson: median(&pearsons),
        per_frame,
    })
}
