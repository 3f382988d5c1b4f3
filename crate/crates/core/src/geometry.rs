//! Camera model and rigid poses.
//!
//! Poses are stored world-to-camera: a world point `s` maps to the camera
//! frame as `R s + t`. [`Pose::camera_to_world`] gives the opposite direction.

use nalgebra::{Matrix3, Matrix3x4, Matrix4, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used for the rotation invariants `‖RᵀR − I‖_F` and `det R`.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// Pinhole intrinsics without distortion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let intr = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        intr.validate()?;
        Ok(intr)
    }

    /// 640×480 camera with a 525 px focal length.
    pub fn vga() -> Self {
        Self {
            fx: 525.0,
            fy: 525.0,
            cx: 320.0,
            cy: 240.0,
            width: 640,
            height: 480,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.fx, self.fy, self.cx, self.cy].iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidIntrinsics("non-finite value".into()));
        }
        if self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(Error::InvalidIntrinsics(format!(
                "focal lengths must be positive (fx={}, fy={})",
                self.fx, self.fy
            )));
        }
        if !(0.0..self.width as f64).contains(&self.cx) || !(0.0..self.height as f64).contains(&self.cy) {
            return Err(Error::InvalidIntrinsics(format!(
                "principal point ({}, {}) outside {}x{} image",
                self.cx, self.cy, self.width, self.height
            )));
        }
        Ok(())
    }

    /// Same optics at a different resolution: focal lengths and principal
    /// point scale with the image size.
    pub fn scaled(&self, factor: f64) -> Self {
        let width = ((self.width as f64) * factor).round().max(1.0) as usize;
        let height = ((self.height as f64) * factor).round().max(1.0) as usize;
        Self {
            fx: self.fx * factor,
            fy: self.fy * factor,
            cx: self.cx * factor,
            cy: self.cy * factor,
            width,
            height,
        }
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    /// Pixel of a camera-frame point, or `None` when the depth is not positive.
    pub fn project(&self, p_cam: &Vector3<f64>) -> Option<Vector2<f64>> {
        if p_cam.z <= 0.0 {
            return None;
        }
        Some(Vector2::new(
            self.fx * p_cam.x / p_cam.z + self.cx,
            self.fy * p_cam.y / p_cam.z + self.cy,
        ))
    }

    /// Camera-frame point at the given depth (z) along the ray through `pixel`.
    pub fn back_project(&self, pixel: &Vector2<f64>, depth: f64) -> Vector3<f64> {
        Vector3::new(
            (pixel.x - self.cx) / self.fx * depth,
            (pixel.y - self.cy) / self.fy * depth,
            depth,
        )
    }

    /// Half-open pixel extent `[0, width) × [0, height)`.
    pub fn contains(&self, pixel: &Vector2<f64>) -> bool {
        pixel.x >= 0.0 && pixel.y >= 0.0 && pixel.x < self.width as f64 && pixel.y < self.height as f64
    }
}

/// Rigid world-to-camera transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Pose {
    /// Checked constructor; the rotation must be orthonormal with det +1
    /// within [`ROTATION_TOLERANCE`].
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        if !rotation.iter().chain(translation.iter()).all(|v| v.is_finite()) {
            return Err(Error::InvalidPose("non-finite entry".into()));
        }
        let ortho = (rotation.transpose() * rotation - Matrix3::identity()).norm();
        if ortho >= ROTATION_TOLERANCE {
            return Err(Error::InvalidPose(format!("‖RᵀR − I‖_F = {ortho:e}")));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > ROTATION_TOLERANCE {
            return Err(Error::InvalidPose(format!("det R = {det}")));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// From an axis-angle vector (radians) and a translation.
    pub fn from_axis_angle(axis_angle: Vector3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation: so3_exp(&axis_angle),
            translation,
        }
    }

    /// World-to-camera pose of a camera at `center` looking at `target`,
    /// with image y pointing along the projection of `down`.
    pub fn look_at(center: Vector3<f64>, target: Vector3<f64>, down: Vector3<f64>) -> Result<Self> {
        let z = (target - center)
            .try_normalize(1e-12)
            .ok_or_else(|| Error::InvalidPose("look_at target equals center".into()))?;
        let x = down
            .cross(&z)
            .try_normalize(1e-12)
            .ok_or_else(|| Error::InvalidPose("look_at down vector parallel to view".into()))?;
        let y = z.cross(&x);
        let rotation = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
        let translation = -(rotation * center);
        Ok(Self {
            rotation,
            translation,
        })
    }

    /// Builds the nearest valid pose from a rotation that has drifted
    /// slightly off SO(3).
    pub fn orthonormalized(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation: nearest_rotation(&rotation),
            translation,
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn transform_point(&self, world: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * world + self.translation
    }

    /// Camera center in world coordinates, `−Rᵀt`.
    pub fn camera_center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }

    /// Camera-to-world transform (the inverse of `self`).
    pub fn camera_to_world(&self) -> Pose {
        Pose {
            rotation: self.rotation.transpose(),
            translation: self.camera_center(),
        }
    }

    /// Interprets `self` as camera-to-world and returns the world-to-camera pose.
    pub fn from_camera_to_world(c2w: &Pose) -> Pose {
        c2w.camera_to_world()
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    /// Right-multiplied exponential increment `self · Exp(δ)` with
    /// `δ = [ω, ρ]` (rotation first), re-orthonormalized.
    pub fn retract(&self, delta: &PoseDelta) -> Pose {
        let increment = se3_exp(delta);
        let composed = self.compose(&increment);
        Pose::orthonormalized(composed.rotation, composed.translation)
    }

    /// The 3×4 projective matrix `[R | t]`.
    pub fn matrix3x4(&self) -> Matrix3x4<f64> {
        let mut m = Matrix3x4::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.set_column(3, &self.translation);
        m
    }

    pub fn matrix4(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Invariant residuals: `(‖RᵀR − I‖_F, |det R − 1|)`.
    pub fn invariant_residuals(&self) -> (f64, f64) {
        (
            (self.rotation.transpose() * self.rotation - Matrix3::identity()).norm(),
            (self.rotation.determinant() - 1.0).abs(),
        )
    }
}

/// 6-DoF increment: axis-angle rotation (radians) then translation (meters).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseDelta {
    pub rotation: Vector3<f64>,
    pub translation: Vector3<f64>,
}

impl PoseDelta {
    pub fn from_slice(v: &[f64]) -> Self {
        Self {
            rotation: Vector3::new(v[0], v[1], v[2]),
            translation: Vector3::new(v[3], v[4], v[5]),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.rotation.iter().chain(self.translation.iter()).all(|v| v.is_finite())
    }
}

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rodrigues' formula with a Taylor branch near zero.
pub fn so3_exp(omega: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = omega.norm_squared();
    let k = skew(omega);
    let (a, b) = if theta2 < 1e-16 {
        (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0)
    } else {
        let theta = theta2.sqrt();
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    Matrix3::identity() + k * a + k * k * b
}

/// Left Jacobian of SO(3), the `V` matrix of the SE(3) exponential.
fn so3_left_jacobian(omega: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = omega.norm_squared();
    let k = skew(omega);
    let (b, c) = if theta2 < 1e-16 {
        (0.5 - theta2 / 24.0, 1.0 / 6.0 - theta2 / 120.0)
    } else {
        let theta = theta2.sqrt();
        ((1.0 - theta.cos()) / theta2, (theta - theta.sin()) / (theta2 * theta))
    };
    Matrix3::identity() + k * b + k * k * c
}

pub fn se3_exp(delta: &PoseDelta) -> Pose {
    Pose {
        rotation: so3_exp(&delta.rotation),
        translation: so3_left_jacobian(&delta.rotation) * delta.translation,
    }
}

/// Rotation angle of `R` in radians, robust near 0 and π.
pub fn rotation_angle(r: &Matrix3<f64>) -> f64 {
    let cos = (r.trace() - 1.0) / 2.0;
    let axis = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]);
    let sin = axis.norm() / 2.0;
    sin.atan2(cos)
}

/// Nearest rotation in Frobenius norm (polar factor with det +1).
pub fn nearest_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let (mut u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    if (u * v_t).determinant() < 0.0 {
        // nalgebra sorts singular values descending: column 2 is the smallest.
        let col = u.column(2) * -1.0;
        u.set_column(2, &col);
    }
    u * v_t
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exp_of_small_and_large_angles_is_orthonormal() {
        for w in [Vector3::new(1e-10, 0.0, 0.0), Vector3::new(0.3, -1.2, 2.0)] {
            let r = so3_exp(&w);
            assert!((r.transpose() * r - Matrix3::identity()).norm() < 1e-14);
            assert_relative_eq!(rotation_angle(&r), w.norm(), epsilon = 1e-12);
        }
    }

    #[test]
    fn look_at_points_optical_axis_at_target() {
        let pose = Pose::look_at(
            Vector3::new(1.0, 2.0, -3.0),
            Vector3::new(0.0, 0.0, 4.0),
            Vector3::new(0.0, 1.0, 0.0),
        )
        .unwrap();
        let p = pose.transform_point(&Vector3::new(0.0, 0.0, 4.0));
        assert!(p.x.abs() < 1e-12 && p.y.abs() < 1e-12 && p.z > 0.0);
        let (o, d) = pose.invariant_residuals();
        assert!(o < 1e-12 && d < 1e-12);
    }

    #[test]
    fn camera_to_world_round_trip() {
        let pose = Pose::from_axis_angle(Vector3::new(0.1, 0.2, -0.3), Vector3::new(1.0, -2.0, 0.5));
        let back = Pose::from_camera_to_world(&pose.camera_to_world());
        assert_relative_eq!(back.rotation(), pose.rotation(), epsilon = 1e-14);
        assert_relative_eq!(back.translation(), pose.translation(), epsilon = 1e-14);
        let s = Vector3::new(0.4, 0.5, 3.0);
        let c = pose.transform_point(&s);
        assert_relative_eq!(pose.camera_to_world().transform_point(&c), s, epsilon = 1e-12);
    }

    #[test]
    fn se3_exp_matches_matrix_series() {
        let delta = PoseDelta {
            rotation: Vector3::new(0.2, -0.1, 0.05),
            translation: Vector3::new(0.3, 0.1, -0.2),
        };
        let mut xi = Matrix4::zeros();
        xi.fixed_view_mut::<3, 3>(0, 0).copy_from(&skew(&delta.rotation));
        xi.fixed_view_mut::<3, 1>(0, 3).copy_from(&delta.translation);
        let mut term = Matrix4::identity();
        let mut sum = Matrix4::identity();
        for k in 1..30 {
            term = term * xi / k as f64;
            sum += term;
        }
        assert_relative_eq!(se3_exp(&delta).matrix4(), sum, epsilon = 1e-13);
    }

    #[test]
    fn checked_pose_rejects_reflection() {
        let r = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(Pose::new(r, Vector3::zeros()).is_err());
        assert!(Pose::new(Matrix3::identity() * 1.001, Vector3::zeros()).is_err());
    }

    #[test]
    fn intrinsics_validation() {
        assert!(CameraIntrinsics::new(525.0, 525.0, 320.0, 240.0, 640, 480).is_ok());
        assert!(CameraIntrinsics::new(-1.0, 525.0, 320.0, 240.0, 640, 480).is_err());
        assert!(CameraIntrinsics::new(525.0, 525.0, 640.0, 240.0, 640, 480).is_err());
    }
}
