//! Supervision losses and their closed-form gradients.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::dlt::{Correspondence, DltSystem, Vector12, WeightVector};
use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, Pose};

/// Hyper-parameters shared by the losses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    /// Inlier threshold for classification labels (pixels).
    pub tau: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Balance of the regression term against classification.
    pub gamma: f64,
    /// Depth of the fallback point for invalid predictions (meters).
    pub depth_heuristic: f64,
    pub depth_min: f64,
    pub depth_max: f64,
    /// Predictions reprojecting further than this are invalid (pixels).
    pub max_reprojection: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            tau: 1.0,
            alpha: 5.0,
            beta: 1e-4,
            gamma: 5.0,
            depth_heuristic: 10.0,
            depth_min: 0.1,
            depth_max: 1000.0,
            max_reprojection: 1000.0,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tau", self.tau),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("depth_heuristic", self.depth_heuristic),
            ("depth_min", self.depth_min),
            ("max_reprojection", self.max_reprojection),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidParameter(format!("loss.{name} must be positive, got {value}")));
            }
        }
        if self.depth_min >= self.depth_max {
            return Err(Error::InvalidParameter("loss.depth_min must be below loss.depth_max".into()));
        }
        Ok(())
    }
}

/// Reprojection error of one scene coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reprojection {
    /// Pixel distance for a point with positive camera depth.
    Visible(f64),
    BehindCamera,
}

impl Reprojection {
    /// The error, with points behind the camera mapped to `+∞`.
    pub fn value(self) -> f64 {
        match self {
            Reprojection::Visible(r) => r,
            Reprojection::BehindCamera => f64::INFINITY,
        }
    }
}

/// `‖K·π(T s) − p‖₂` for a world-to-camera `pose`.
pub fn reproj_error(pose: &Pose, intr: &CameraIntrinsics, s: &Vector3<f64>, p: &Vector2<f64>) -> Reprojection {
    match intr.project(&pose.transform_point(s)) {
        Some(q) => Reprojection::Visible((q - p).norm()),
        None => Reprojection::BehindCamera,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReprojectionLoss {
    pub mean: f64,
    pub per_point: Vec<f64>,
    /// Whether each prediction passed the validity test.
    pub valid: Vec<bool>,
}

/// Mean of per-point terms: the reprojection error for valid predictions,
/// otherwise the L1 distance to the point at `depth_heuristic` along the
/// observed pixel ray.
pub fn reprojection_loss(
    coords: &[Vector3<f64>],
    pixels: &[Vector2<f64>],
    pose_gt: &Pose,
    intr: &CameraIntrinsics,
    cfg: &LossConfig,
) -> Result<ReprojectionLoss> {
    if coords.len() != pixels.len() {
        return Err(Error::DimensionMismatch {
            expected: coords.len(),
            got: pixels.len(),
        });
    }
    if coords.is_empty() {
        return Err(Error::Empty("coordinates"));
    }
    let c2w = pose_gt.camera_to_world();
    let mut per_point = Vec::with_capacity(coords.len());
    let mut valid = Vec::with_capacity(coords.len());
    for (s, p) in coords.iter().zip(pixels) {
        let depth = pose_gt.transform_point(s).z;
        let r = reproj_error(pose_gt, intr, s, p).value();
        let ok = depth >= cfg.depth_min && depth <= cfg.depth_max && r < cfg.max_reprojection;
        let term = if ok {
            r
        } else {
            let fallback = c2w.transform_point(&intr.back_project(p, cfg.depth_heuristic));
            (fallback - s).abs().sum()
        };
        per_point.push(term);
        valid.push(ok);
    }
    let mean = per_point.iter().sum::<f64>() / per_point.len() as f64;
    Ok(ReprojectionLoss { mean, per_point, valid })
}

/// Binary inlier labels, `l_i ⇔ r_i ≤ τ`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InlierLabels(pub Vec<bool>);

impl InlierLabels {
    pub fn from_errors(errors: &[f64], tau: f64) -> Self {
        Self(errors.iter().map(|&r| r <= tau).collect())
    }

    /// Labels of every predicted coordinate under a reference pose.
    pub fn from_pose(
        pose: &Pose,
        intr: &CameraIntrinsics,
        coords: &[Vector3<f64>],
        pixels: &[Vector2<f64>],
        tau: f64,
    ) -> Self {
        let errors: Vec<f64> = coords
            .iter()
            .zip(pixels)
            .map(|(s, p)| reproj_error(pose, intr, s, p).value())
            .collect();
        Self::from_errors(&errors, tau)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub const BCE_CLAMP: f64 = 1e-7;

/// Mean binary cross-entropy with weights clamped to `[1e-7, 1 − 1e-7]`.
pub fn classification_loss(w: &WeightVector, labels: &InlierLabels) -> Result<f64> {
    check_len(w.len(), labels.len())?;
    if w.is_empty() {
        return Err(Error::Empty("weights"));
    }
    let sum: f64 = w
        .as_slice()
        .iter()
        .zip(&labels.0)
        .map(|(&wi, &li)| {
            let p = wi.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
            if li {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    Ok(sum / w.len() as f64)
}

/// `∂L_c/∂w`; zero wherever the clamp is active.
pub fn grad_classification_loss_wrt_w(w: &WeightVector, labels: &InlierLabels) -> Result<Vec<f64>> {
    check_len(w.len(), labels.len())?;
    let n = w.len() as f64;
    Ok(w.as_slice()
        .iter()
        .zip(&labels.0)
        .map(|(&wi, &li)| {
            if wi <= BCE_CLAMP || wi >= 1.0 - BCE_CLAMP {
                0.0
            } else if li {
                -1.0 / (wi * n)
            } else {
                1.0 / ((1.0 - wi) * n)
            }
        })
        .collect())
}

/// Unit-norm flattened ground-truth `[R | t]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruthVector(Vector12);

impl GroundTruthVector {
    pub fn from_pose(pose: &Pose) -> Self {
        Self(crate::dlt::flatten_pose_matrix(&pose.matrix3x4()).normalize())
    }

    pub fn new(t: Vector12) -> Result<Self> {
        let norm = t.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InvalidParameter("ground-truth vector must be non-zero".into()));
        }
        Ok(Self(t / norm))
    }

    pub fn vector(&self) -> &Vector12 {
        &self.0
    }
}

/// Per-correspondence pieces of the regression loss: `a_i = Σ (X⁽ʳ⁾t)²` and
/// `b_i = Σ ‖X̄⁽ʳ⁾‖²` over the two rows of correspondence `i`.
fn regression_terms(sys: &DltSystem, t: &Vector12) -> Vec<(f64, f64)> {
    sys.row_pairs()
        .iter()
        .map(|pair| {
            let mut a = 0.0;
            let mut b = 0.0;
            for r in 0..2 {
                let row = pair.row(r).transpose();
                let proj = row.dot(t);
                a += proj * proj;
                b += (row - t * proj).norm_squared();
            }
            (a, b)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionLoss {
    pub value: f64,
    /// `tr(X̄ᵀ diag(w) X̄)`; `β ≈ 1/trace` balances the two terms.
    pub trace: f64,
    /// `tᵀXᵀ diag(w) X t`.
    pub data_term: f64,
}

/// Eigendecomposition-free pose loss
/// `tᵀXᵀ diag(w) X t + α·exp(−β·tr(X̄ᵀ diag(w) X̄))` with `X̄ = X(I − ttᵀ)`.
pub fn regression_loss(
    sys: &DltSystem,
    w: &WeightVector,
    t_gt: &GroundTruthVector,
    cfg: &LossConfig,
) -> Result<RegressionLoss> {
    check_len(sys.n(), w.len())?;
    let mut data_term = 0.0;
    let mut trace = 0.0;
    for (&wi, (a, b)) in w.as_slice().iter().zip(regression_terms(sys, t_gt.vector())) {
        data_term += wi * a;
        trace += wi * b;
    }
    Ok(RegressionLoss {
        value: data_term + cfg.alpha * (-cfg.beta * trace).exp(),
        trace,
        data_term,
    })
}

/// `∂L_r/∂w_i = a_i − αβ·exp(−β·tr)·b_i`.
pub fn grad_regression_loss_wrt_w(
    sys: &DltSystem,
    w: &WeightVector,
    t_gt: &GroundTruthVector,
    cfg: &LossConfig,
) -> Result<Vec<f64>> {
    check_len(sys.n(), w.len())?;
    let terms = regression_terms(sys, t_gt.vector());
    let trace: f64 = w.as_slice().iter().zip(&terms).map(|(wi, (_, b))| wi * b).sum();
    let decay = cfg.alpha * cfg.beta * (-cfg.beta * trace).exp();
    Ok(terms.iter().map(|(a, b)| a - decay * b).collect())
}

/// Which parts of `L_r` a coordinate gradient differentiates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoordGradient {
    /// Both terms.
    Full,
    /// Only `tᵀXᵀ diag(w) X t`, which pulls each coordinate onto its pixel ray.
    DataTerm,
}

/// Gradient of `L_r` with respect to every scene coordinate, through the
/// row construction of the data matrix.
pub fn grad_regression_loss_wrt_coords(
    corrs: &[Correspondence],
    w: &WeightVector,
    t_gt: &GroundTruthVector,
    cfg: &LossConfig,
) -> Result<Vec<Vector3<f64>>> {
    coordinate_gradient(corrs, w, t_gt, cfg, CoordGradient::Full)
}

pub fn coordinate_gradient(
    corrs: &[Correspondence],
    w: &WeightVector,
    t_gt: &GroundTruthVector,
    cfg: &LossConfig,
    which: CoordGradient,
) -> Result<Vec<Vector3<f64>>> {
    check_len(corrs.len(), w.len())?;
    let t = t_gt.vector();
    let t_u = Vector3::new(t[0], t[1], t[2]);
    let t_v = Vector3::new(t[4], t[5], t[6]);
    let t_w = Vector3::new(t[8], t[9], t[10]);

    let decay = match which {
        CoordGradient::Full => {
            let sys = DltSystem::from_correspondences(corrs)?;
            let trace: f64 = w
                .as_slice()
                .iter()
                .zip(regression_terms(&sys, t))
                .map(|(wi, (_, b))| wi * b)
                .sum();
            cfg.alpha * cfg.beta * (-cfg.beta * trace).exp()
        }
        CoordGradient::DataTerm => 0.0,
    };

    Ok(corrs
        .iter()
        .zip(w.as_slice())
        .map(|(c, &wi)| {
            if wi == 0.0 {
                return Vector3::zeros();
            }
            let s = c.point();
            // Row residuals and their derivatives with respect to s.
            let g1 = t_u - t_w * c.u;
            let g2 = t_v - t_w * c.v;
            let e1 = s.dot(&g1) + t[3] - c.u * t[11];
            let e2 = s.dot(&g2) + t[7] - c.v * t[11];
            let d_data = (g1 * e1 + g2 * e2) * 2.0;
            let d_norms = s * (2.0 * (2.0 + c.u * c.u + c.v * c.v));
            let d_bar = d_norms - d_data;
            (d_data - d_bar * decay) * wi
        })
        .collect())
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}
