//! Fitting free per-correspondence weight parameters from pose supervision.
//!
//! Weights are `w = tanh(relu(θ))`. Stage two fixes the scene coordinates and
//! descends `L_c + γ·L_r` (or `γ·L_r` alone) in θ; stage three additionally
//! moves the coordinates along the regression loss.

use std::time::Instant;

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::dlt::{normalize_observations, wdlt_solve, DltSystem, WeightVector};
use crate::error::{Error, Result};
use crate::eval::{median, pose_error};
use crate::losses::{
    classification_loss, coordinate_gradient, grad_classification_loss_wrt_w, grad_regression_loss_wrt_w,
    regression_loss, reproj_error, CoordGradient, GroundTruthVector, InlierLabels, LossConfig,
};
use crate::simulator::{Observation, SyntheticScene};

/// Raw weight parameters, activated by `tanh ∘ relu`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightParams {
    pub theta: Vec<f64>,
}

pub const THETA_INIT: f64 = 1.5;

impl WeightParams {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidParameter("θ must be finite".into()));
        }
        Ok(Self { theta })
    }

    /// Optimistic start: every correspondence trusted at `tanh(1.5) ≈ 0.905`.
    pub fn optimistic(n: usize) -> Self {
        Self::constant(n, THETA_INIT)
    }

    pub fn constant(n: usize, value: f64) -> Self {
        Self { theta: vec![value; n] }
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn activated(&self) -> Vec<f64> {
        self.theta.iter().map(|&t| activation(t)).collect()
    }

    pub fn weights(&self) -> WeightVector {
        WeightVector::new(self.activated()).expect("activation lies in [0, 1)")
    }
}

pub fn activation(theta: f64) -> f64 {
    theta.max(0.0).tanh()
}

/// Derivative of [`activation`]; zero for θ ≤ 0.
pub fn activation_derivative(theta: f64) -> f64 {
    if theta > 0.0 {
        let t = theta.tanh();
        1.0 - t * t
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSettings {
    /// Step size of the weight-only stage.
    pub learning_rate: f64,
    /// Step size of the joint stage (weights and coordinates).
    pub e2e_learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Adam ε of the coordinate updates. Gradients well below it produce
    /// plain gradient steps, so coordinates settle at a fixed point instead
    /// of oscillating with the step size.
    pub coord_eps: f64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            e2e_learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            coord_eps: 1e-3,
        }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.e2e_learning_rate > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0
            && self.coord_eps > 0.0;
        if !ok {
            return Err(Error::InvalidParameter(format!("invalid optimizer settings {self:?}")));
        }
        Ok(())
    }
}

/// Adam over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, lr: f64, settings: &OptimizerSettings) -> Self {
        Self {
            lr,
            beta1: settings.beta1,
            beta2: settings.beta2,
            eps: settings.eps,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        debug_assert_eq!(params.len(), grad.len());
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (k, (p, g)) in params.iter_mut().zip(grad).enumerate() {
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g;
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[k] / c1;
            let v_hat = self.v[k] / c2;
            *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitMode {
    /// `L_c + γ·L_r`.
    ClassificationRegression,
    /// `γ·L_r`: pose supervision only.
    RegressionOnly,
}

impl std::str::FromStr for FitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classification-regression" | "cls-reg" | "both" => Ok(Self::ClassificationRegression),
            "regression-only" | "reg" | "regression" => Ok(Self::RegressionOnly),
            other => Err(Error::InvalidParameter(format!(
                "unknown fit mode {other:?} (expected classification-regression or regression-only)"
            ))),
        }
    }
}

/// Per-iteration record of a fit. Pose errors are `None` when the weights
/// could not produce a pose (e.g. fewer than seven non-zero weights, or a
/// degenerate solution under gross outliers).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub mode: FitMode,
    pub loss: Vec<f64>,
    pub classification: Vec<f64>,
    pub regression: Vec<f64>,
    pub translation_error_m: Vec<Option<f64>>,
    pub rotation_error_deg: Vec<Option<f64>>,
    pub final_theta: Vec<f64>,
    pub final_weights: Vec<f64>,
    /// Not serialized, so reports of identical runs compare byte-for-byte.
    #[serde(skip)]
    pub wall_clock_s: f64,
}

/// Equality ignores the wall-clock time.
impl PartialEq for FitReport {
    fn eq(&self, other: &Self) -> bool {
        self.mode == other.mode
            && self.loss == other.loss
            && self.classification == other.classification
            && self.regression == other.regression
            && self.translation_error_m == other.translation_error_m
            && self.rotation_error_deg == other.rotation_error_deg
            && self.final_theta == other.final_theta
            && self.final_weights == other.final_weights
    }
}

impl FitReport {
    fn new(mode: FitMode, iters: usize) -> Self {
        Self {
            mode,
            loss: Vec::with_capacity(iters),
            classification: Vec::with_capacity(iters),
            regression: Vec::with_capacity(iters),
            translation_error_m: Vec::with_capacity(iters),
            rotation_error_deg: Vec::with_capacity(iters),
            final_theta: Vec::new(),
            final_weights: Vec::new(),
            wall_clock_s: 0.0,
        }
    }

    pub fn iterations(&self) -> usize {
        self.loss.len()
    }

    pub fn final_params(&self) -> WeightParams {
        WeightParams {
            theta: self.final_theta.clone(),
        }
    }

    /// `iter,loss,L_c,L_r,trans_err_m,rot_err_deg`; missing pose errors are empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,loss,L_c,L_r,trans_err_m,rot_err_deg\n");
        for i in 0..self.loss.len() {
            let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
            out.push_str(&format!(
                "{},{:e},{:e},{:e},{},{}\n",
                i,
                self.loss[i],
                self.classification[i],
                self.regression[i],
                opt(self.translation_error_m[i]),
                opt(self.rotation_error_deg[i]),
            ));
        }
        out
    }

    fn record(&mut self, total: f64, lc: f64, lr: f64, pose: Option<(f64, f64)>) {
        self.loss.push(total);
        self.classification.push(lc);
        self.regression.push(lr);
        self.translation_error_m.push(pose.map(|p| p.0));
        self.rotation_error_deg.push(pose.map(|p| p.1));
    }
}

/// One loss/gradient evaluation of the stage objective at fixed coordinates.
struct Objective {
    total: f64,
    classification: f64,
    regression: f64,
    grad_w: Vec<f64>,
}

fn evaluate(
    sys: &DltSystem,
    w: &WeightVector,
    labels: &InlierLabels,
    t_gt: &GroundTruthVector,
    cfg: &LossConfig,
    mode: FitMode,
) -> Result<Objective> {
    let lr = regression_loss(sys, w, t_gt, cfg)?.value;
    let mut grad_w: Vec<f64> = grad_regression_loss_wrt_w(sys, w, t_gt, cfg)?
        .into_iter()
        .map(|g| cfg.gamma * g)
        .collect();
    let lc = classification_loss(w, labels)?;
    let total = match mode {
        FitMode::ClassificationRegression => {
            for (g, gc) in grad_w.iter_mut().zip(grad_classification_loss_wrt_w(w, labels)?) {
                *g += gc;
            }
            lc + cfg.gamma * lr
        }
        FitMode::RegressionOnly => cfg.gamma * lr,
    };
    Ok(Objective {
        total,
        classification: lc,
        regression: lr,
        grad_w,
    })
}

fn pose_errors(obs: &[Observation], w: &WeightVector, scene: &SyntheticScene) -> Option<(f64, f64)> {
    wdlt_solve(obs, w, &scene.intrinsics).ok().map(|p| {
        let e = pose_error(&p, &scene.gt_pose);
        (e.translation_error, e.rotation_error)
    })
}

fn check_divergence(iteration: usize, loss: f64, initial: f64) -> Result<()> {
    if !loss.is_finite() || loss > 1e6 * initial.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::Diverged { iteration, loss, initial });
    }
    Ok(())
}

/// Stage two from the optimistic initialization.
pub fn fit_weights(
    scene: &SyntheticScene,
    cfg: &LossConfig,
    opt: &OptimizerSettings,
    mode: FitMode,
    iters: usize,
) -> Result<FitReport> {
    fit_weights_from(scene, &WeightParams::optimistic(scene.len()), cfg, opt, mode, iters)
}

/// Stage two: θ descends the stage objective with the coordinates fixed.
/// Labels come from ground-truth reprojection errors, computed once.
pub fn fit_weights_from(
    scene: &SyntheticScene,
    init: &WeightParams,
    cfg: &LossConfig,
    opt: &OptimizerSettings,
    mode: FitMode,
    iters: usize,
) -> Result<FitReport> {
    let started = Instant::now();
    scene.validate()?;
    cfg.validate()?;
    opt.validate()?;
    if iters == 0 {
        return Err(Error::InvalidParameter("iters must be ≥ 1".into()));
    }
    if init.len() != scene.len() {
        return Err(Error::DimensionMismatch {
            expected: scene.len(),
            got: init.len(),
        });
    }

    let obs = scene.observations();
    let sys = DltSystem::from_correspondences(&normalize_observations(&obs, &scene.intrinsics))?;
    let labels = InlierLabels::from_pose(
        &scene.gt_pose,
        &scene.intrinsics,
        &scene.predicted_coords,
        &scene.pixel_obs,
        cfg.tau,
    );
    let t_gt = GroundTruthVector::from_pose(&scene.gt_pose);

    let mut theta = init.theta.clone();
    let mut adam = Adam::new(theta.len(), opt.learning_rate, opt);
    let mut report = FitReport::new(mode, iters);
    let mut initial = None;

    for iteration in 0..iters {
        let params = WeightParams { theta: theta.clone() };
        let w = params.weights();
        let obj = evaluate(&sys, &w, &labels, &t_gt, cfg, mode)?;
        let initial_loss = *initial.get_or_insert(obj.total);
        check_divergence(iteration, obj.total, initial_loss)?;
        report.record(obj.total, obj.classification, obj.regression, pose_errors(&obs, &w, scene));

        let grad: Vec<f64> = obj.grad_w.iter().zip(&theta).map(|(g, &t)| g * activation_derivative(t)).collect();
        adam.step(&mut theta, &grad);
    }

    let params = WeightParams { theta };
    report.final_weights = params.activated();
    report.final_theta = params.theta;
    report.wall_clock_s = started.elapsed().as_secs_f64();
    Ok(report)
}

/// Result of the joint stage: the weight report plus the moved coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct E2eReport {
    pub fit: FitReport,
    /// Mean ground-truth reprojection error over the non-outlier points,
    /// per iteration.
    pub inlier_reprojection_px: Vec<f64>,
    pub initial_median_reprojection_px: f64,
    pub final_median_reprojection_px: f64,
    pub final_coords: Vec<[f64; 3]>,
}

fn reprojection_errors(scene: &SyntheticScene, coords: &[Vector3<f64>]) -> Vec<f64> {
    coords
        .iter()
        .zip(&scene.pixel_obs)
        .map(|(s, p): (&Vector3<f64>, &Vector2<f64>)| reproj_error(&scene.gt_pose, &scene.intrinsics, s, p).value())
        .collect()
}

fn mean_inlier(errors: &[f64], outlier_mask: &[bool]) -> f64 {
    let inl: Vec<f64> = errors.iter().zip(outlier_mask).filter(|(_, &o)| !o).map(|(e, _)| *e).collect();
    if inl.is_empty() {
        return 0.0;
    }
    inl.iter().sum::<f64>() / inl.len() as f64
}

/// Stage three: θ and the scene coordinates move jointly (simultaneous
/// updates). The coordinates follow the data term of the regression loss;
/// see [`CoordGradient::DataTerm`]. Labels are recomputed from the moving
/// coordinates every iteration.
pub fn e2e_refine(
    scene: &SyntheticScene,
    init: &WeightParams,
    cfg: &LossConfig,
    opt: &OptimizerSettings,
    mode: FitMode,
    iters: usize,
) -> Result<E2eReport> {
    let started = Instant::now();
    scene.validate()?;
    cfg.validate()?;
    opt.validate()?;
    if iters == 0 {
        return Err(Error::InvalidParameter("iters must be ≥ 1".into()));
    }
    if init.len() != scene.len() {
        return Err(Error::DimensionMismatch {
            expected: scene.len(),
            got: init.len(),
        });
    }
    let t_gt = GroundTruthVector::from_pose(&scene.gt_pose);
    let mut theta = init.theta.clone();
    let mut coords: Vec<f64> = scene.predicted_coords.iter().flat_map(|c| c.iter().copied()).collect();
    let mut adam_theta = Adam::new(theta.len(), opt.e2e_learning_rate, opt);
    let mut adam_coords = Adam::new(
        coords.len(),
        opt.e2e_learning_rate,
        &OptimizerSettings {
            eps: opt.coord_eps,
            ..*opt
        },
    );
    let mut report = FitReport::new(mode, iters);
    let mut inlier_curve = Vec::with_capacity(iters);
    let initial_median = median(&reprojection_errors(scene, &scene.predicted_coords)).expect("scene is non-empty");
    let mut initial = None;

    let points = |flat: &[f64]| -> Vec<Vector3<f64>> { flat.chunks(3).map(Vector3::from_column_slice).collect() };

    for iteration in 0..iters {
        let pts = points(&coords);
        let obs: Vec<Observation> = pts
            .iter()
            .zip(&scene.pixel_obs)
            .map(|(c, p)| Observation { coord: *c, pixel: *p })
            .collect();
        let corrs = normalize_observations(&obs, &scene.intrinsics);
        let sys = DltSystem::from_correspondences(&corrs)?;
        let errors = reprojection_errors(scene, &pts);
        let labels = InlierLabels::from_errors(&errors, cfg.tau);
        let w = WeightParams { theta: theta.clone() }.weights();

        let obj = evaluate(&sys, &w, &labels, &t_gt, cfg, mode)?;
        let initial_loss = *initial.get_or_insert(obj.total);
        check_divergence(iteration, obj.total, initial_loss)?;
        inlier_curve.push(mean_inlier(&errors, &scene.outlier_mask));
        let pose = wdlt_solve(&obs, &w, &scene.intrinsics).ok().map(|p| {
            let e = pose_error(&p, &scene.gt_pose);
            (e.translation_error, e.rotation_error)
        });
        report.record(obj.total, obj.classification, obj.regression, pose);

        let grad_theta: Vec<f64> = obj.grad_w.iter().zip(&theta).map(|(g, &t)| g * activation_derivative(t)).collect();
        let grad_coords: Vec<f64> = coordinate_gradient(&corrs, &w, &t_gt, cfg, CoordGradient::DataTerm)?
            .iter()
            .flat_map(|g| (g * cfg.gamma).iter().copied().collect::<Vec<_>>())
            .collect();
        adam_theta.step(&mut theta, &grad_theta);
        adam_coords.step(&mut coords, &grad_coords);
    }

    let final_pts = points(&coords);
    let final_median = median(&reprojection_errors(scene, &final_pts)).expect("scene is non-empty");
    let params = WeightParams { theta };
    report.final_weights = params.activated();
    report.final_theta = params.theta;
    report.wall_clock_s = started.elapsed().as_secs_f64();
    Ok(E2eReport {
        fit: report,
        inlier_reprojection_px: inlier_curve,
        initial_median_reprojection_px: initial_median,
        final_median_reprojection_px: final_median,
        final_coords: final_pts.iter().map(|p| [p.x, p.y, p.z]).collect(),
    })
}
