//! Camera re-localization from scene-coordinate predictions by weighted
//! least squares.
//!
//! The pipeline takes 2D–3D correspondences (a predicted world-frame scene
//! coordinate per pixel), solves a weighted Direct Linear Transform for the
//! camera pose, and regularizes the result onto SE(3). Around that solver
//! the crate provides the supervision losses with analytic gradients,
//! per-correspondence weight fitting from pose supervision, inlier-set
//! Levenberg–Marquardt refinement, photometric test-time adaptation of the
//! weights, and a deterministic synthetic scene generator to check all of
//! it against ground truth.

pub mod adapt;
pub mod cli;
pub mod config;
pub mod dlt;
pub mod eigen;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod io;
pub mod losses;
pub mod photometric;
pub mod refine;
pub mod simulator;
pub mod weight_fit;

pub use dlt::{ransac_dlt, wdlt_solve, Correspondence, DltSolution, DltSystem, WeightVector};
pub use error::{Error, Result};
pub use eval::{pose_error, recall, weight_interpretability, EvalSummary, PoseError};
pub use geometry::{CameraIntrinsics, Pose, PoseDelta};
pub use losses::LossConfig;
pub use refine::{lm_refine, RefineConfig};
pub use simulator::{generate_scene, Observation, SceneParams, SyntheticImagePair, SyntheticScene};
pub use weight_fit::{fit_weights, FitMode, FitReport, WeightParams};
