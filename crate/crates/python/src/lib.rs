//! Python bindings: scenes, poses, the weighted DLT solver, RANSAC, LM
//! refinement, weight fitting and pose metrics.

use nalgebra::{Matrix3, Vector3};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use scwls::dlt::{ransac_dlt as ransac_core, wdlt_solve as wdlt_core, WeightVector};
use scwls::eval::{pose_error as pose_error_core, ranking_auc as ranking_auc_core};
use scwls::io;
use scwls::losses::LossConfig;
use scwls::refine::{lm_refine as lm_refine_core, RefineConfig};
use scwls::simulator::{generate_scene as generate_core, SceneParams, SyntheticScene};
use scwls::weight_fit::{fit_weights as fit_core, FitMode, OptimizerSettings, WeightParams};

fn py_err(e: scwls::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// World-to-camera rigid transform.
#[pyclass(name = "Pose", module = "scwls", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyPose(scwls::Pose);

#[pymethods]
impl PyPose {
    /// `rotation` is row-major 3×3; fails unless it is a proper rotation.
    #[new]
    fn new(rotation: [[f64; 3]; 3], translation: [f64; 3]) -> PyResult<Self> {
        let r = Matrix3::from_fn(|i, j| rotation[i][j]);
        scwls::Pose::new(r, Vector3::from(translation)).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn from_axis_angle(axis_angle: [f64; 3], translation: [f64; 3]) -> Self {
        Self(scwls::Pose::from_axis_angle(Vector3::from(axis_angle), Vector3::from(translation)))
    }

    #[staticmethod]
    fn identity() -> Self {
        Self(scwls::Pose::identity())
    }

    #[getter]
    fn rotation(&self) -> [[f64; 3]; 3] {
        let r = self.0.rotation();
        [0, 1, 2].map(|i| [r[(i, 0)], r[(i, 1)], r[(i, 2)]])
    }

    #[getter]
    fn translation(&self) -> [f64; 3] {
        let t = self.0.translation();
        [t.x, t.y, t.z]
    }

    fn camera_center(&self) -> [f64; 3] {
        let c = self.0.camera_center();
        [c.x, c.y, c.z]
    }

    fn to_json(&self) -> String {
        io::pose_to_json(&self.0)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        io::pose_from_json(text, "<python>").map(Self).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("Pose(rotation={:?}, translation={:?})", self.rotation(), self.translation())
    }
}

#[pyclass(name = "CameraIntrinsics", module = "scwls", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyIntrinsics(scwls::CameraIntrinsics);

#[pymethods]
impl PyIntrinsics {
    #[new]
    fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> PyResult<Self> {
        scwls::CameraIntrinsics::new(fx, fy, cx, cy, width, height).map(Self).map_err(py_err)
    }

    /// 640×480, f = 525.
    #[staticmethod]
    fn vga() -> Self {
        Self(scwls::CameraIntrinsics::vga())
    }

    #[getter]
    fn fx(&self) -> f64 {
        self.0.fx
    }

    #[getter]
    fn fy(&self) -> f64 {
        self.0.fy
    }

    #[getter]
    fn cx(&self) -> f64 {
        self.0.cx
    }

    #[getter]
    fn cy(&self) -> f64 {
        self.0.cy
    }

    fn project(&self, p_cam: [f64; 3]) -> Option<[f64; 2]> {
        self.0.project(&Vector3::from(p_cam)).map(|q| [q.x, q.y])
    }
}

/// Synthetic frame: ground truth plus predicted scene coordinates.
#[pyclass(name = "Scene", module = "scwls", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyScene(SyntheticScene);

#[pymethods]
impl PyScene {
    #[staticmethod]
    #[pyo3(signature = (seed, n_points=100, outlier_fraction=0.3, pixel_noise_sigma=0.5, coord_noise_sigma=0.01))]
    fn generate(
        seed: u64,
        n_points: usize,
        outlier_fraction: f64,
        pixel_noise_sigma: f64,
        coord_noise_sigma: f64,
    ) -> PyResult<Self> {
        let params = SceneParams {
            n_points,
            outlier_fraction,
            pixel_noise_sigma,
            coord_noise_sigma,
            ..SceneParams::default()
        };
        generate_core(&params, seed).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        io::scene_from_json(text, "<python>").map(Self).map_err(py_err)
    }

    fn to_json(&self) -> String {
        io::scene_to_json(&self.0)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    #[getter]
    fn gt_pose(&self) -> PyPose {
        PyPose(self.0.gt_pose)
    }

    #[getter]
    fn intrinsics(&self) -> PyIntrinsics {
        PyIntrinsics(self.0.intrinsics)
    }

    #[getter]
    fn outlier_mask(&self) -> Vec<bool> {
        self.0.outlier_mask.clone()
    }

    #[getter]
    fn predicted_coords(&self) -> Vec<[f64; 3]> {
        self.0.predicted_coords.iter().map(|c| [c.x, c.y, c.z]).collect()
    }

    #[getter]
    fn pixels(&self) -> Vec<[f64; 2]> {
        self.0.pixel_obs.iter().map(|p| [p.x, p.y]).collect()
    }
}

/// Weighted DLT pose; uniform weights when `weights` is omitted.
#[pyfunction]
#[pyo3(signature = (scene, weights=None))]
fn wdlt_solve(scene: &PyScene, weights: Option<Vec<f64>>) -> PyResult<PyPose> {
    let sc = &scene.0;
    let w = match weights {
        Some(w) => WeightVector::new(w).map_err(py_err)?,
        None => WeightVector::uniform(sc.len()),
    };
    wdlt_core(&sc.observations(), &w, &sc.intrinsics).map(PyPose).map_err(py_err)
}

/// RANSAC baseline; returns the pose and its consensus indices.
#[pyfunction]
#[pyo3(signature = (scene, seed, iterations=256, inlier_threshold=10.0))]
fn ransac_dlt(scene: &PyScene, seed: u64, iterations: usize, inlier_threshold: f64) -> PyResult<(PyPose, Vec<usize>)> {
    let sc = &scene.0;
    let out = ransac_core(&sc.observations(), &sc.intrinsics, iterations, inlier_threshold, seed).map_err(py_err)?;
    Ok((PyPose(out.pose), out.inliers))
}

/// Inlier-set Levenberg–Marquardt refinement with default settings.
#[pyfunction]
fn lm_refine(scene: &PyScene, pose: &PyPose) -> PyResult<PyPose> {
    let sc = &scene.0;
    lm_refine_core(&pose.0, &sc.observations(), &sc.intrinsics, &RefineConfig::default())
        .map(|o| PyPose(o.pose))
        .map_err(py_err)
}

/// Fitted parameters and per-iteration loss of a weight fit.
#[pyclass(name = "FitResult", module = "scwls", frozen, get_all)]
pub struct PyFitResult {
    theta: Vec<f64>,
    weights: Vec<f64>,
    loss: Vec<f64>,
}

/// Pose-supervised weight fit; `mode` is `"classification-regression"` or
/// `"regression-only"`.
#[pyfunction]
#[pyo3(signature = (scene, mode="classification-regression", iterations=5000))]
fn fit_weights(scene: &PyScene, mode: &str, iterations: usize) -> PyResult<PyFitResult> {
    let mode: FitMode = mode.parse().map_err(py_err)?;
    let report = fit_core(&scene.0, &LossConfig::default(), &OptimizerSettings::default(), mode, iterations)
        .map_err(py_err)?;
    Ok(PyFitResult {
        theta: report.final_theta.clone(),
        weights: report.final_weights.clone(),
        loss: report.loss,
    })
}

/// Activated weights `tanh(relu(θ))`.
#[pyfunction]
fn activate(theta: Vec<f64>) -> PyResult<Vec<f64>> {
    Ok(WeightParams::new(theta).map_err(py_err)?.activated())
}

/// `(translation error in meters, rotation error in degrees)`.
#[pyfunction]
fn pose_error(est: &PyPose, gt: &PyPose) -> (f64, f64) {
    let e = pose_error_core(&est.0, &gt.0);
    (e.translation_error, e.rotation_error)
}

#[pyfunction]
fn ranking_auc(weights: Vec<f64>, outlier_mask: Vec<bool>) -> PyResult<f64> {
    ranking_auc_core(&weights, &outlier_mask).map_err(py_err)
}

#[pymodule]
#[pyo3(name = "scwls")]
fn scwls_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPose>()?;
    m.add_class::<PyIntrinsics>()?;
    m.add_class::<PyScene>()?;
    m.add_class::<PyFitResult>()?;
    m.add_function(wrap_pyfunction!(wdlt_solve, m)?)?;
    m.add_function(wrap_pyfunction!(ransac_dlt, m)?)?;
    m.add_function(wrap_pyfunction!(lm_refine, m)?)?;
    m.add_function(wrap_pyfunction!(fit_weights, m)?)?;
    m.add_function(wrap_pyfunction!(activate, m)?)?;
    m.add_function(wrap_pyfunction!(pose_error, m)?)?;
    m.add_function(wrap_pyfunction!(ranking_auc, m)?)?;
    Ok(())
}
