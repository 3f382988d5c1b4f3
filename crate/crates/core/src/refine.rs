//! Inlier-set Levenberg–Marquardt refinement of a pose.
//!
//! Outer loop: select inliers under the current pose, run damped
//! Gauss–Newton on their squared reprojection errors, re-select. Stops once
//! the re-selected set equals the set just optimized, or after
//! `max_iterations` rounds.

use nalgebra::{Matrix2x3, Matrix3, SMatrix, SVector, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{skew, CameraIntrinsics, Pose, PoseDelta};
use crate::losses::{reproj_error, Reprojection};
use crate::simulator::Observation;

type Matrix6 = SMatrix<f64, 6, 6>;
type Vector6 = SVector<f64, 6>;
/// Jacobian of one pixel residual with respect to `[ω, ρ]`.
pub type ResidualJacobian = SMatrix<f64, 2, 6>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineConfig {
    #[serde(rename = "threshold_px")]
    pub inlier_threshold: f64,
    #[serde(rename = "max_iters")]
    pub max_iterations: usize,
    /// Gauss–Newton steps per inlier set.
    pub max_inner_steps: usize,
    pub lambda_init: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
    /// Damping beyond which a rejected step counts as converged.
    pub lambda_max: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            inlier_threshold: 10.0,
            max_iterations: 100,
            max_inner_steps: 50,
            lambda_init: 1e-3,
            lambda_up: 10.0,
            lambda_down: 10.0,
            lambda_max: 1e10,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 || self.max_inner_steps == 0 {
            return Err(Error::InvalidParameter("refine iteration counts must be ≥ 1".into()));
        }
        let positive = [
            self.inlier_threshold,
            self.lambda_init,
            self.lambda_up,
            self.lambda_down,
            self.lambda_max,
        ];
        if positive.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidParameter("refine thresholds and damping must be positive".into()));
        }
        Ok(())
    }
}

/// Indices whose reprojection error is at most `threshold` with positive depth.
pub fn find_inliers(pose: &Pose, obs: &[Observation], intr: &CameraIntrinsics, threshold: f64) -> Vec<usize> {
    obs.iter()
        .enumerate()
        .filter(|(_, o)| matches!(reproj_error(pose, intr, &o.coord, &o.pixel), Reprojection::Visible(r) if r <= threshold))
        .map(|(i, _)| i)
        .collect()
}

/// Pixel residual `K·π(R s + t) − p`, `None` behind the camera.
fn residual(pose: &Pose, intr: &CameraIntrinsics, o: &Observation) -> Option<Vector2<f64>> {
    intr.project(&pose.transform_point(&o.coord)).map(|q| q - o.pixel)
}

/// Analytic Jacobian of the pixel projection of `s` under `pose · Exp(δ)` at
/// `δ = 0`, columns ordered `[ω, ρ]`.
pub fn projection_jacobian(pose: &Pose, intr: &CameraIntrinsics, s: &Vector3<f64>) -> Option<ResidualJacobian> {
    let pc = pose.transform_point(s);
    if pc.z <= 0.0 {
        return None;
    }
    let inv_z = 1.0 / pc.z;
    let d_proj = Matrix2x3::new(
        intr.fx * inv_z,
        0.0,
        -intr.fx * pc.x * inv_z * inv_z,
        0.0,
        intr.fy * inv_z,
        -intr.fy * pc.y * inv_z * inv_z,
    );
    let r: &Matrix3<f64> = pose.rotation();
    // p_c(δ) ≈ R (s + ω × s + ρ) + t
    let d_omega = -(r * skew(s));
    let mut j = ResidualJacobian::zeros();
    j.fixed_view_mut::<2, 3>(0, 0).copy_from(&(d_proj * d_omega));
    j.fixed_view_mut::<2, 3>(0, 3).copy_from(&(d_proj * r));
    Some(j)
}

fn cost(pose: &Pose, intr: &CameraIntrinsics, obs: &[Observation], set: &[usize]) -> Option<f64> {
    set.iter()
        .map(|&i| residual(pose, intr, &obs[i]).map(|r| r.norm_squared()))
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineOutcome {
    pub pose: Pose,
    /// Outer rounds performed.
    pub iterations: usize,
    pub final_inliers: Vec<usize>,
    /// Costs of accepted steps, each on the inlier set it was computed for,
    /// one inner sequence per outer round (first entry is the starting cost).
    pub accepted_costs: Vec<Vec<f64>>,
}

pub fn lm_refine(
    pose_init: &Pose,
    obs: &[Observation],
    intr: &CameraIntrinsics,
    cfg: &RefineConfig,
) -> Result<RefineOutcome> {
    cfg.validate()?;
    let mut pose = *pose_init;
    let mut inliers = find_inliers(&pose, obs, intr, cfg.inlier_threshold);
    let mut accepted_costs = Vec::new();

    for iteration in 1..=cfg.max_iterations {
        if inliers.len() < 6 {
            return Err(Error::InsufficientInliers(inliers.len()));
        }
        let (next_pose, costs) = optimize_on_set(&pose, obs, intr, &inliers, cfg)?;
        pose = next_pose;
        accepted_costs.push(costs);
        let reselected = find_inliers(&pose, obs, intr, cfg.inlier_threshold);
        if reselected == inliers || iteration == cfg.max_iterations {
            let converged_set = if reselected == inliers { inliers } else { reselected };
            return Ok(RefineOutcome {
                pose,
                iterations: iteration,
                final_inliers: converged_set,
                accepted_costs,
            });
        }
        inliers = reselected;
    }
    unreachable!("max_iterations ≥ 1 returns inside the loop")
}

/// Marquardt iterations on a fixed inlier set; returns the pose and the
/// accepted cost sequence.
fn optimize_on_set(
    start: &Pose,
    obs: &[Observation],
    intr: &CameraIntrinsics,
    set: &[usize],
    cfg: &RefineConfig,
) -> Result<(Pose, Vec<f64>)> {
    let mut pose = *start;
    let mut current = cost(&pose, intr, obs, set).ok_or(Error::InsufficientInliers(0))?;
    let mut costs = vec![current];
    let mut lambda = cfg.lambda_init;

    for _ in 0..cfg.max_inner_steps {
        let mut jtj = Matrix6::zeros();
        let mut jtr = Vector6::zeros();
        for &i in set {
            let o = &obs[i];
            let (Some(r), Some(j)) = (residual(&pose, intr, o), projection_jacobian(&pose, intr, &o.coord)) else {
                continue;
            };
            jtj += j.transpose() * j;
            jtr += j.transpose() * r;
        }
        if jtr.amax() == 0.0 {
            break;
        }

        let mut accepted = false;
        let mut solved_any = false;
        while lambda <= cfg.lambda_max {
            let mut damped = jtj;
            for k in 0..6 {
                damped[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(chol) = damped.cholesky() else {
                lambda *= cfg.lambda_up;
                continue;
            };
            solved_any = true;
            let step = -chol.solve(&jtr);
            let delta = PoseDelta::from_slice(step.as_slice());
            if !delta.is_finite() {
                lambda *= cfg.lambda_up;
                continue;
            }
            let candidate = pose.retract(&delta);
            match cost(&candidate, intr, obs, set) {
                Some(c) if c < current => {
                    pose = candidate;
                    current = c;
                    costs.push(c);
                    lambda = (lambda / cfg.lambda_down).max(1e-12);
                    accepted = true;
                    break;
                }
                _ => lambda *= cfg.lambda_up,
            }
        }
        if !solved_any {
            return Err(Error::LmStall { best: Box::new(pose) });
        }
        if !accepted {
            break;
        }
        let last = costs.len() - 1;
        if costs[last - 1] - costs[last] <= 1e-15 * costs[last - 1] {
            break;
        }
    }
    Ok((pose, costs))
}
