//! Deterministic synthetic scenes and textured image pairs.
//!
//! All randomness comes from [`SceneRng`]: ChaCha8 seeded through
//! `rand_core::SeedableRng::seed_from_u64`, uniforms built from the top 53
//! bits of `next_u64`, and normals from the cosine branch of Box–Muller
//! (two uniforms per normal). Another implementation that follows the same
//! draw order reproduces every scene bit for bit.
//!
//! Scene draw order: camera-frame points (three uniforms each, rejection
//! sampled against the image), then per-point pixel noise, then the outlier
//! index shuffle, then the predicted coordinates in index order.

use nalgebra::{Vector2, Vector3};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, Pose};

/// Seedable portable generator shared by every simulator routine.
pub struct SceneRng(ChaCha8Rng);

impl SceneRng {
    pub fn new(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal via Box–Muller.
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }
}

/// Inputs of [`generate_scene`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneParams {
    pub n_points: usize,
    pub pose: Pose,
    pub intrinsics: CameraIntrinsics,
    pub pixel_noise_sigma: f64,
    pub coord_noise_sigma: f64,
    pub outlier_fraction: f64,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            n_points: 100,
            pose: default_pose(),
            intrinsics: CameraIntrinsics::vga(),
            pixel_noise_sigma: 0.5,
            coord_noise_sigma: 0.01,
            outlier_fraction: 0.3,
        }
    }
}

/// A generic non-axis-aligned world-to-camera pose used by the CLI and tests.
pub fn default_pose() -> Pose {
    Pose::from_axis_angle(Vector3::new(0.1, -0.25, 0.05), Vector3::new(0.3, -0.2, 0.5))
}

/// Ground truth plus simulated scene-coordinate predictions for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub gt_points: Vec<Vector3<f64>>,
    pub gt_pose: Pose,
    pub intrinsics: CameraIntrinsics,
    pub predicted_coords: Vec<Vector3<f64>>,
    pub pixel_obs: Vec<Vector2<f64>>,
    pub outlier_mask: Vec<bool>,
    pub seed: u64,
}

/// A 2D–3D pair in pixel units: a predicted scene coordinate and the pixel
/// it was predicted for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub coord: Vector3<f64>,
    pub pixel: Vector2<f64>,
}

impl SyntheticScene {
    pub fn len(&self) -> usize {
        self.gt_points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gt_points.is_empty()
    }

    pub fn observations(&self) -> Vec<Observation> {
        self.predicted_coords
            .iter()
            .zip(&self.pixel_obs)
            .map(|(c, p)| Observation { coord: *c, pixel: *p })
            .collect()
    }

    pub fn outlier_count(&self) -> usize {
        self.outlier_mask.iter().filter(|&&o| o).count()
    }

    /// Checks the structural invariants (lengths, N > 6, intrinsics,
    /// finiteness). Used after parsing files.
    pub fn validate(&self) -> Result<()> {
        self.intrinsics.validate()?;
        let n = self.gt_points.len();
        for len in [self.predicted_coords.len(), self.pixel_obs.len(), self.outlier_mask.len()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, got: len });
            }
        }
        if n <= 6 {
            return Err(Error::TooFewCorrespondences(n));
        }
        let finite = self
            .gt_points
            .iter()
            .chain(&self.predicted_coords)
            .all(|v| v.iter().all(|x| x.is_finite()))
            && self.pixel_obs.iter().all(|v| v.iter().all(|x| x.is_finite()));
        if !finite {
            return Err(Error::InvalidParameter("non-finite coordinate".into()));
        }
        Ok(())
    }
}

/// Samples a scene: points uniform in a 4×4×4 m box spanning depths 2–6 m
/// in front of the camera, kept only where they project inside the image.
pub fn generate_scene(params: &SceneParams, seed: u64) -> Result<SyntheticScene> {
    sample_scene(params, seed, &[])
}

/// Scene sampling shared with sequences: points must additionally project
/// inside every pose in `extra_views`.
fn sample_scene(params: &SceneParams, seed: u64, extra_views: &[Pose]) -> Result<SyntheticScene> {
    let n = params.n_points;
    if n <= 6 {
        return Err(Error::TooFewCorrespondences(n));
    }
    if !(0.0..1.0).contains(&params.outlier_fraction) {
        return Err(Error::InvalidParameter(format!(
            "outlier_fraction must lie in [0, 1), got {}",
            params.outlier_fraction
        )));
    }
    if params.pixel_noise_sigma < 0.0 || params.coord_noise_sigma < 0.0 {
        return Err(Error::InvalidParameter("noise sigmas must be non-negative".into()));
    }
    params.intrinsics.validate()?;
    let intr = &params.intrinsics;
    let c2w = params.pose.camera_to_world();
    let mut rng = SceneRng::new(seed);

    let budget = 200 * n;
    let mut cam_points = Vec::with_capacity(n);
    for _ in 0..budget {
        let p = Vector3::new(rng.uniform_in(-2.0, 2.0), rng.uniform_in(-2.0, 2.0), rng.uniform_in(2.0, 6.0));
        let visible = |pose: Option<&Pose>| {
            let q = match pose {
                None => p,
                Some(pose) => pose.transform_point(&c2w.transform_point(&p)),
            };
            intr.project(&q).is_some_and(|px| intr.contains(&px))
        };
        if visible(None) && extra_views.iter().all(|v| visible(Some(v))) {
            cam_points.push(p);
            if cam_points.len() == n {
                break;
            }
        }
    }
    if cam_points.len() < n {
        return Err(Error::InsufficientVisiblePoints {
            visible: cam_points.len(),
            requested: n,
        });
    }

    let gt_points: Vec<Vector3<f64>> = cam_points.iter().map(|p| c2w.transform_point(p)).collect();
    let pixel_obs: Vec<Vector2<f64>> = cam_points
        .iter()
        .map(|p| {
            let exact = intr.project(p).expect("sampled with positive depth");
            noisy_pixel(&mut rng, intr, exact, params.pixel_noise_sigma)
        })
        .collect();

    let n_outliers = (params.outlier_fraction * n as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    for i in 0..n_outliers {
        let j = i + rng.index(n - i);
        order.swap(i, j);
    }
    let mut outlier_mask = vec![false; n];
    for &i in &order[..n_outliers] {
        outlier_mask[i] = true;
    }

    let (lo, hi) = bounding_box(&gt_points);
    let center = (lo + hi) / 2.0;
    // Half-extent of the box expanded 2× about its center.
    let half = hi - lo;
    let predicted_coords = gt_points
        .iter()
        .zip(&outlier_mask)
        .map(|(gt, &outlier)| {
            if outlier {
                Vector3::new(
                    rng.uniform_in(center.x - half.x, center.x + half.x),
                    rng.uniform_in(center.y - half.y, center.y + half.y),
                    rng.uniform_in(center.z - half.z, center.z + half.z),
                )
            } else {
                let sigma = params.coord_noise_sigma;
                gt + Vector3::new(sigma * rng.normal(), sigma * rng.normal(), sigma * rng.normal())
            }
        })
        .collect();

    Ok(SyntheticScene {
        gt_points,
        gt_pose: params.pose,
        intrinsics: *intr,
        predicted_coords,
        pixel_obs,
        outlier_mask,
        seed,
    })
}

/// Adds Gaussian pixel noise, redrawing (then clamping) so the observation
/// stays inside the image.
fn noisy_pixel(rng: &mut SceneRng, intr: &CameraIntrinsics, exact: Vector2<f64>, sigma: f64) -> Vector2<f64> {
    if sigma == 0.0 {
        return exact;
    }
    for _ in 0..16 {
        let p = exact + Vector2::new(sigma * rng.normal(), sigma * rng.normal());
        if intr.contains(&p) {
            return p;
        }
    }
    let max_x = intr.width as f64 - 1e-9;
    let max_y = intr.height as f64 - 1e-9;
    Vector2::new(exact.x.clamp(0.0, max_x), exact.y.clamp(0.0, max_y))
}

fn bounding_box(points: &[Vector3<f64>]) -> (Vector3<f64>, Vector3<f64>) {
    let mut lo = Vector3::repeat(f64::INFINITY);
    let mut hi = Vector3::repeat(f64::NEG_INFINITY);
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (lo, hi)
}

/// Row-major grayscale image with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                got: data.len(),
            });
        }
        Ok(Self { width, height, data })
    }

    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Bilinear sample; `None` unless `0 ≤ x ≤ W−1` and `0 ≤ y ≤ H−1`.
    pub fn sample(&self, x: f64, y: f64) -> Option<f64> {
        let (w, h) = (self.width as f64, self.height as f64);
        if !(x >= 0.0 && y >= 0.0 && x <= w - 1.0 && y <= h - 1.0) {
            return None;
        }
        Some(self.sample_clamped(x, y))
    }

    /// Bilinear sample with edge extension outside the grid.
    pub fn sample_clamped(&self, x: f64, y: f64) -> f64 {
        let x = x.clamp(0.0, (self.width - 1) as f64);
        let y = y.clamp(0.0, (self.height - 1) as f64);
        let x0 = (x.floor() as usize).min(self.width.saturating_sub(2));
        let y0 = (y.floor() as usize).min(self.height.saturating_sub(2));
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let top = self.at(x0, y0) * (1.0 - fx) + self.at(x1, y0) * fx;
        let bottom = self.at(x0, y1) * (1.0 - fx) + self.at(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }
}

/// Two views of a textured plane with per-pixel source scene coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticImagePair {
    pub source_image: GrayImage,
    pub target_image: GrayImage,
    pub source_pose: Pose,
    pub target_pose: Pose,
    /// World-frame coordinate of every source pixel, row-major.
    pub source_coords: Vec<Vector3<f64>>,
    pub intrinsics: CameraIntrinsics,
}

/// Geometry of the rendered plane and the render camera.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImagePairParams {
    pub intrinsics: CameraIntrinsics,
    pub source_pose: Pose,
    /// Distance of the plane along the source optical axis (meters).
    pub plane_depth: f64,
    /// Maximum tilt of the plane normal away from the source axis (radians).
    pub max_tilt: f64,
}

impl Default for ImagePairParams {
    fn default() -> Self {
        Self {
            intrinsics: CameraIntrinsics::vga().scaled(0.125),
            source_pose: default_pose(),
            plane_depth: 4.0,
            max_tilt: 0.25,
        }
    }
}

/// Renders a pair whose target camera is the source camera moved by
/// `baseline` meters along its own x axis.
pub fn generate_image_pair(params: &ImagePairParams, baseline: f64, seed: u64) -> Result<SyntheticImagePair> {
    let c2w = params.source_pose.camera_to_world();
    let offset = c2w.rotation() * Vector3::new(baseline, 0.0, 0.0);
    let target_c2w = Pose::orthonormalized(*c2w.rotation(), c2w.translation() + offset);
    let target_pose = target_c2w.camera_to_world();
    render_pair(params, &target_pose, seed)
}

/// Renders the textured plane seen from `params.source_pose` and `target_pose`.
///
/// The plane texture is a smooth random pattern plus a ramp laid out on the
/// target pixel grid and carried onto the plane through the target camera
/// with bilinear interpolation. Warping the source into the target with the
/// true target pose therefore reproduces the target samples exactly.
pub fn render_pair(params: &ImagePairParams, target_pose: &Pose, seed: u64) -> Result<SyntheticImagePair> {
    let intr = params.intrinsics;
    intr.validate()?;
    if params.plane_depth <= 0.0 {
        return Err(Error::InvalidParameter("plane_depth must be positive".into()));
    }
    let (w, h) = (intr.width, intr.height);
    let mut rng = SceneRng::new(seed);

    // Plane through the point on the source axis at plane_depth, normal tilted.
    let src_c2w = params.source_pose.camera_to_world();
    let tilt_x = rng.uniform_in(-params.max_tilt, params.max_tilt);
    let tilt_y = rng.uniform_in(-params.max_tilt, params.max_tilt);
    let normal_cam = Vector3::new(tilt_x.sin(), tilt_y.sin(), -1.0).normalize();
    let anchor_cam = Vector3::new(0.0, 0.0, params.plane_depth);

    // Target texture: ramp + four low-frequency waves, bounded in [0.05, 0.95].
    let angle = rng.uniform_in(0.0, std::f64::consts::TAU);
    let ramp_dir = Vector2::new(angle.cos(), angle.sin());
    let waves: Vec<(Vector2<f64>, f64, f64)> = (0..4)
        .map(|_| {
            let wavelength = rng.uniform_in(0.35, 0.9) * w.max(h) as f64;
            let dir = rng.uniform_in(0.0, std::f64::consts::TAU);
            let k = Vector2::new(dir.cos(), dir.sin()) * (std::f64::consts::TAU / wavelength);
            (k, rng.uniform_in(0.0, std::f64::consts::TAU), rng.uniform_in(0.5, 1.0))
        })
        .collect();
    let amp_sum: f64 = waves.iter().map(|(_, _, a)| a).sum();
    let center = Vector2::new((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let half_diag = center.norm().max(1.0);
    let mut target_data = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let p = Vector2::new(x as f64, y as f64);
            let ramp = (p - center).dot(&ramp_dir) / half_diag;
            let wave: f64 = waves.iter().map(|(k, phase, a)| a * (k.dot(&p) + phase).sin()).sum::<f64>() / amp_sum;
            target_data.push(0.5 + 0.25 * ramp + 0.2 * wave);
        }
    }
    let target_image = GrayImage::new(w, h, target_data)?;

    let mut source_coords = Vec::with_capacity(w * h);
    let mut source_data = Vec::with_capacity(w * h);
    let mut inside = 0usize;
    for y in 0..h {
        for x in 0..w {
            let ray = intr.back_project(&Vector2::new(x as f64, y as f64), 1.0);
            let denom = normal_cam.dot(&ray);
            if denom.abs() < 1e-12 {
                return Err(Error::InvalidParameter("plane parallel to a viewing ray".into()));
            }
            let depth = normal_cam.dot(&anchor_cam) / denom;
            if depth <= 0.0 {
                return Err(Error::InvalidParameter("plane behind the source camera".into()));
            }
            let world = src_c2w.transform_point(&(ray * depth));
            let value = match intr.project(&target_pose.transform_point(&world)) {
                Some(q) => {
                    if target_image.sample(q.x, q.y).is_some() {
                        inside += 1;
                    }
                    target_image.sample_clamped(q.x, q.y)
                }
                None => 0.5,
            };
            source_coords.push(world);
            source_data.push(value);
        }
    }
    let percent = 100.0 * inside as f64 / (w * h) as f64;
    if percent < 50.0 {
        return Err(Error::NoOverlap { percent });
    }

    Ok(SyntheticImagePair {
        source_image: GrayImage::new(w, h, source_data)?,
        target_image,
        source_pose: params.source_pose,
        target_pose: *target_pose,
        source_coords,
        intrinsics: intr,
    })
}

/// One camera of a [`SyntheticSequence`].
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceFrame {
    pub pose: Pose,
    pub pixel_obs: Vec<Vector2<f64>>,
}

/// Fixed landmarks with per-landmark scene-coordinate predictions, observed
/// by a short camera trajectory. Weights attach to landmarks, so they carry
/// over between frames.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSequence {
    pub intrinsics: CameraIntrinsics,
    pub gt_points: Vec<Vector3<f64>>,
    pub predicted_coords: Vec<Vector3<f64>>,
    pub outlier_mask: Vec<bool>,
    pub frames: Vec<SequenceFrame>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequenceParams {
    pub scene: SceneParams,
    pub n_frames: usize,
    /// Camera-center displacement between consecutive frames (meters).
    pub step: f64,
    /// Rotation between consecutive frames about the camera y axis (radians).
    pub yaw_step: f64,
}

impl Default for SequenceParams {
    fn default() -> Self {
        Self {
            scene: SceneParams::default(),
            n_frames: 12,
            step: 0.03,
            yaw_step: 0.004,
        }
    }
}

/// Moves the camera sideways with a slight yaw; landmarks are sampled in
/// the frame-0 box and kept only when every frame sees them.
pub fn generate_sequence(params: &SequenceParams, seed: u64) -> Result<SyntheticSequence> {
    if params.n_frames < 2 {
        return Err(Error::InvalidParameter("a sequence needs at least 2 frames".into()));
    }
    let c2w0 = params.scene.pose.camera_to_world();
    let poses: Vec<Pose> = (0..params.n_frames)
        .map(|k| {
            if k == 0 {
                return params.scene.pose;
            }
            let yaw = crate::geometry::so3_exp(&Vector3::new(0.0, params.yaw_step * k as f64, 0.0));
            let rot = c2w0.rotation() * yaw;
            let center = c2w0.translation() + c2w0.rotation() * Vector3::new(params.step * k as f64, 0.0, 0.0);
            Pose::orthonormalized(rot, center).camera_to_world()
        })
        .collect();
    let base = sample_scene(&params.scene, seed, &poses[1..])?;
    let intr = base.intrinsics;
    let mut rng = SceneRng::new(seed ^ 0x5eed_5eed_5eed_5eed);

    let mut frames = Vec::with_capacity(params.n_frames);
    frames.push(SequenceFrame {
        pose: poses[0],
        pixel_obs: base.pixel_obs.clone(),
    });
    for pose in &poses[1..] {
        let pixel_obs = base
            .gt_points
            .iter()
            .map(|gt| {
                let exact = intr.project(&pose.transform_point(gt)).expect("visible by construction");
                noisy_pixel(&mut rng, &intr, exact, params.scene.pixel_noise_sigma)
            })
            .collect();
        frames.push(SequenceFrame { pose: *pose, pixel_obs });
    }

    Ok(SyntheticSequence {
        intrinsics: intr,
        gt_points: base.gt_points,
        predicted_coords: base.predicted_coords,
        outlier_mask: base.outlier_mask,
        frames,
        seed,
    })
}

impl SyntheticSequence {
    /// The frame as a standalone scene (shared landmarks, per-frame pose and pixels).
    pub fn frame_scene(&self, k: usize) -> SyntheticScene {
        SyntheticScene {
            gt_points: self.gt_points.clone(),
            gt_pose: self.frames[k].pose,
            intrinsics: self.intrinsics,
            predicted_coords: self.predicted_coords.clone(),
            pixel_obs: self.frames[k].pixel_obs.clone(),
            outlier_mask: self.outlier_mask.clone(),
            seed: self.seed,
        }
    }

    pub fn observations(&self, k: usize) -> Vec<Observation> {
        self.predicted_coords
            .iter()
            .zip(&self.frames[k].pixel_obs)
            .map(|(c, p)| Observation { coord: *c, pixel: *p })
            .collect()
    }
}
