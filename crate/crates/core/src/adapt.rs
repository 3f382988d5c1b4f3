//! Test-time adaptation of the weight parameters from photometric
//! consistency between co-visible frames.
//!
//! Scene coordinates are detached: the only path from θ to the loss runs
//! through the weighted DLT pose of the target frame. The eigenvector
//! derivative is analytic; the Procrustes step and the photometric loss are
//! differentiated with central differences in the 12 pose-vector entries.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::dlt::{
    procrustes_with_anchor, reshape_pose_vector, wdlt_solve_detailed, DltSolution, DltSystem, Vector12, WeightVector,
};
use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, Pose};
use crate::photometric::photometric_loss;
use crate::simulator::{render_pair, ImagePairParams, Observation, SyntheticImagePair, SyntheticSequence};
use crate::weight_fit::{activation_derivative, Adam, OptimizerSettings, WeightParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptConfig {
    /// Frame gap between the source and target view of a pair.
    pub frame_interval: usize,
    pub iterations: usize,
    pub learning_rate: f64,
    /// Central-difference step on the unit pose vector.
    pub fd_step: f64,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        Self {
            frame_interval: 1,
            iterations: 150,
            learning_rate: 2e-2,
            fd_step: 1e-6,
        }
    }
}

impl AdaptConfig {
    pub fn validate(&self) -> Result<()> {
        if self.frame_interval == 0 || self.iterations == 0 {
            return Err(Error::InvalidParameter("adapt frame_interval and iterations must be ≥ 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.fd_step > 0.0) {
            return Err(Error::InvalidParameter("adapt learning_rate and fd_step must be positive".into()));
        }
        Ok(())
    }
}

/// A rendered image pair plus the landmark observations of its target
/// frame, from which the target pose is solved.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptPair {
    pub images: SyntheticImagePair,
    pub target_obs: Vec<Observation>,
    pub obs_intrinsics: CameraIntrinsics,
}

/// Pairs `(k, k + interval)` for every `k` in `sources`, rendered from the
/// sequence poses.
pub fn sequence_pairs(
    seq: &SyntheticSequence,
    sources: &[usize],
    interval: usize,
    image: &ImagePairParams,
) -> Result<Vec<AdaptPair>> {
    sources
        .iter()
        .map(|&k| {
            let target = k + interval;
            if target >= seq.frames.len() {
                return Err(Error::InvalidParameter(format!(
                    "pair ({k}, {target}) exceeds the {}-frame sequence",
                    seq.frames.len()
                )));
            }
            let params = ImagePairParams {
                source_pose: seq.frames[k].pose,
                ..*image
            };
            let images = render_pair(&params, &seq.frames[target].pose, seq.seed.wrapping_add(k as u64))?;
            Ok(AdaptPair {
                images,
                target_obs: seq.observations(target),
                obs_intrinsics: seq.intrinsics,
            })
        })
        .collect()
}

/// `∂v/∂w_i` for every correspondence, `v` the unit smallest eigenvector
/// of `M = Σ w_i A_i`:
/// `∂v/∂w_i = −Σ_{k>0} v_k v_kᵀ A_i v / (λ_k − λ_0)`.
pub fn grad_pose_wrt_w(sys: &DltSystem, w: &WeightVector, solution: &DltSolution) -> Result<Vec<Vector12>> {
    if sys.n() != w.len() {
        return Err(Error::DimensionMismatch {
            expected: sys.n(),
            got: w.len(),
        });
    }
    let values = &solution.eigen.values;
    let vectors = &solution.eigen.vectors;
    if !(values[1] - values[0] > 1e-10 * solution.trace) {
        return Err(Error::EdGradientUnstable);
    }
    let v = &solution.vec_t;
    Ok(sys
        .row_pairs()
        .iter()
        .map(|rows| {
            let a_v = rows.transpose() * (rows * v);
            let mut dv = Vector12::zeros();
            for k in 1..12 {
                let vk = vectors.column(k);
                dv -= vk * (vk.dot(&a_v) / (values[k] - values[0]));
            }
            dv
        })
        .collect())
}

fn pose_from_vector(v: &Vector12, anchor: &Vector3<f64>) -> Result<Pose> {
    procrustes_with_anchor(&reshape_pose_vector(v), anchor)
}

/// Photometric loss at the pose encoded by `v` and its central-difference
/// gradient with respect to `v`.
pub fn photometric_grad_wrt_vector(
    pair: &SyntheticImagePair,
    v: &Vector12,
    anchor: &Vector3<f64>,
    h: f64,
) -> Result<(f64, Vector12)> {
    let loss_at = |x: &Vector12| -> Result<f64> { Ok(photometric_loss(pair, &pose_from_vector(x, anchor)?, None)?.total) };
    let value = loss_at(v)?;
    let mut grad = Vector12::zeros();
    for k in 0..12 {
        let mut plus = *v;
        let mut minus = *v;
        plus[k] += h;
        minus[k] -= h;
        grad[k] = (loss_at(&plus)? - loss_at(&minus)?) / (2.0 * h);
    }
    Ok((value, grad))
}

/// Loss of one pair and its gradient with respect to θ.
pub fn pair_gradient(pair: &AdaptPair, params: &WeightParams, cfg: &AdaptConfig) -> Result<(f64, Vec<f64>)> {
    let w = params.weights();
    let out = wdlt_solve_detailed(&pair.target_obs, &w, &pair.obs_intrinsics)?;
    let sensitivity = grad_pose_wrt_w(&out.system, &w, &out.solution)?;
    let anchor = out.correspondences[w.argmax().expect("non-empty weights")].point();
    let (loss, dl_dv) = photometric_grad_wrt_vector(&pair.images, &out.solution.vec_t, &anchor, cfg.fd_step)?;
    let grad = sensitivity
        .iter()
        .zip(&params.theta)
        .map(|(dv, &t)| dl_dv.dot(dv) * activation_derivative(t))
        .collect();
    Ok((loss, grad))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptOutcome {
    pub theta: WeightParams,
    /// Mean photometric loss over the usable pairs, per iteration.
    pub loss_curve: Vec<f64>,
    /// Pair evaluations skipped for an unstable eigenvector gradient.
    pub skipped: usize,
}

pub fn adapt_weights(pairs: &[AdaptPair], theta: &WeightParams, cfg: &AdaptConfig) -> Result<AdaptOutcome> {
    adapt_weights_with(pairs, theta, cfg, &OptimizerSettings::default())
}

pub fn adapt_weights_with(
    pairs: &[AdaptPair],
    theta: &WeightParams,
    cfg: &AdaptConfig,
    opt: &OptimizerSettings,
) -> Result<AdaptOutcome> {
    cfg.validate()?;
    opt.validate()?;
    if pairs.is_empty() {
        return Err(Error::Empty("adaptation pairs"));
    }
    for pair in pairs {
        if pair.target_obs.len() != theta.len() {
            return Err(Error::DimensionMismatch {
                expected: theta.len(),
                got: pair.target_obs.len(),
            });
        }
    }
    let mut params = theta.clone();
    let mut adam = Adam::new(params.len(), cfg.learning_rate, opt);
    let mut loss_curve = Vec::with_capacity(cfg.iterations);
    let mut skipped = 0;
    let mut initial = None;

    for iteration in 0..cfg.iterations {
        let mut total = 0.0;
        let mut used = 0usize;
        let mut grad = vec![0.0; params.len()];
        for pair in pairs {
            match pair_gradient(pair, &params, cfg) {
                Ok((loss, g)) => {
                    total += loss;
                    used += 1;
                    for (acc, gi) in grad.iter_mut().zip(g) {
                        *acc += gi;
                    }
                }
                Err(Error::EdGradientUnstable) => skipped += 1,
                Err(e) => return Err(e),
            }
        }
        if used == 0 {
            return Err(Error::EdGradientUnstable);
        }
        let loss = total / used as f64;
        let initial_loss = *initial.get_or_insert(loss);
        if !loss.is_finite() || loss > 1e6 * initial_loss.max(f64::MIN_POSITIVE) {
            return Err(Error::Diverged {
                iteration,
                loss,
                initial: initial_loss,
            });
        }
        loss_curve.push(loss);
        grad.iter_mut().for_each(|g| *g /= used as f64);
        adam.step(&mut params.theta, &grad);
    }
    Ok(AdaptOutcome {
        theta: params,
        loss_curve,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dlt::{assemble_normal_matrix, normalize_observations, solve_smallest_eigvec};
    use crate::simulator::{generate_scene, SceneParams};

    #[test]
    fn sensitivity_matches_finite_differences() {
        let sc = generate_scene(&SceneParams::default(), 4).unwrap();
        let corrs = normalize_observations(&sc.observations(), &sc.intrinsics);
        let sys = DltSystem::from_correspondences(&corrs).unwrap();
        let w = WeightVector::new((0..sc.len()).map(|i| 0.2 + 0.6 * ((i * 37 % 11) as f64 / 10.0)).collect()).unwrap();
        let sol = solve_smallest_eigvec(&assemble_normal_matrix(&sys, &w).unwrap()).unwrap();
        let grads = grad_pose_wrt_w(&sys, &w, &sol).unwrap();
        for i in [0, 17, 55, 99] {
            let h = 1e-6;
            let mut plus = w.as_slice().to_vec();
            let mut minus = plus.clone();
            plus[i] += h;
            minus[i] -= h;
            let vp = solve_smallest_eigvec(&assemble_normal_matrix(&sys, &WeightVector::new(plus).unwrap()).unwrap()).unwrap().vec_t;
            let vm = solve_smallest_eigvec(&assemble_normal_matrix(&sys, &WeightVector::new(minus).unwrap()).unwrap()).unwrap().vec_t;
            let fd = (vp - vm) / (2.0 * h);
            let rel = (fd - grads[i]).norm() / grads[i].norm().max(1e-12);
            assert!(rel < 1e-4, "index {i}: relative error {rel}");
        }
    }

    #[test]
    fn repeated_smallest_eigenvalue_is_unstable() {
        // Force a repeated smallest eigenvalue.
        let sc = generate_scene(&SceneParams::default(), 1).unwrap();
        let corrs = normalize_observations(&sc.observations(), &sc.intrinsics);
        let sys = DltSystem::from_correspondences(&corrs).unwrap();
        let w = WeightVector::uniform(sc.len());
        let mut sol = solve_smallest_eigvec(&assemble_normal_matrix(&sys, &w).unwrap()).unwrap();
        sol.eigen.values[1] = sol.eigen.values[0];
        assert!(matches!(grad_pose_wrt_w(&sys, &w, &sol), Err(Error::EdGradientUnstable)));
    }

    #[test]
    fn config_validation() {
        assert!(AdaptConfig::default().validate().is_ok());
        assert!(AdaptConfig { frame_interval: 0, ..AdaptConfig::default() }.validate().is_err());
        assert!(AdaptConfig { iterations: 0, ..AdaptConfig::default() }.validate().is_err());
    }
}
