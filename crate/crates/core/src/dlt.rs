//! Weighted Direct Linear Transform pose estimation.
//!
//! Each correspondence `[x, y, z, u, v]` (scene coordinate plus normalized
//! pixel) contributes two rows to the `2N × 12` data matrix `X`. With one
//! weight per correspondence applied to both of its rows, the pose is the
//! eigenvector of the smallest eigenvalue of `Xᵀ diag(w) X`, reshaped
//! row-major into a 3×4 matrix and projected onto SE(3) by
//! [`procrustes_regularize`].

use nalgebra::{DMatrix, Matrix3x4, SMatrix, SVector, Vector2, Vector3};

use crate::eigen::{symmetric_eigen, SymmetricEigen};
use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, Pose};
use crate::simulator::{Observation, SceneRng};

pub type Vector12 = SVector<f64, 12>;
pub type Matrix12 = SMatrix<f64, 12, 12>;
/// Rows `2i−1` and `2i` of the data matrix for one correspondence.
pub type RowPair = SMatrix<f64, 2, 12>;

/// Weights at or below this value do not count as support.
pub const SUPPORT_EPSILON: f64 = 1e-6;

/// Scene coordinate `(x, y, z)` with its normalized pixel `(u, v)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub u: f64,
    pub v: f64,
}

impl Correspondence {
    pub fn new(point: Vector3<f64>, normalized: Vector2<f64>) -> Self {
        Self {
            x: point.x,
            y: point.y,
            z: point.z,
            u: normalized.x,
            v: normalized.y,
        }
    }

    pub fn point(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn is_finite(&self) -> bool {
        [self.x, self.y, self.z, self.u, self.v].iter().all(|c| c.is_finite())
    }
}

/// `((p.x − cx)/fx, (p.y − cy)/fy)`.
pub fn normalize_pixel(pixel: &Vector2<f64>, intr: &CameraIntrinsics) -> Vector2<f64> {
    Vector2::new((pixel.x - intr.cx) / intr.fx, (pixel.y - intr.cy) / intr.fy)
}

pub fn normalize_observations(obs: &[Observation], intr: &CameraIntrinsics) -> Vec<Correspondence> {
    obs.iter()
        .map(|o| Correspondence::new(o.coord, normalize_pixel(&o.pixel, intr)))
        .collect()
}

pub fn build_rows(c: &Correspondence) -> RowPair {
    let Correspondence { x, y, z, u, v } = *c;
    RowPair::from_row_slice(&[
        x, y, z, 1.0, 0.0, 0.0, 0.0, 0.0, -u * x, -u * y, -u * z, -u, //
        0.0, 0.0, 0.0, 0.0, x, y, z, 1.0, -v * x, -v * y, -v * z, -v,
    ])
}

/// The data matrix `X`, stored as one row pair per correspondence.
#[derive(Debug, Clone, PartialEq)]
pub struct DltSystem {
    rows: Vec<RowPair>,
}

impl DltSystem {
    pub fn from_correspondences(corrs: &[Correspondence]) -> Result<Self> {
        if corrs.len() <= 6 {
            return Err(Error::TooFewCorrespondences(corrs.len()));
        }
        if !corrs.iter().all(Correspondence::is_finite) {
            return Err(Error::InvalidParameter("non-finite correspondence".into()));
        }
        Ok(Self {
            rows: corrs.iter().map(build_rows).collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn row_pairs(&self) -> &[RowPair] {
        &self.rows
    }

    /// Dense `2N × 12` copy of `X`.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut x = DMatrix::zeros(2 * self.n(), 12);
        for (i, pair) in self.rows.iter().enumerate() {
            x.view_mut((2 * i, 0), (2, 12)).copy_from(pair);
        }
        x
    }

    /// `X · t` as `N` pairs of residuals.
    pub fn residuals(&self, t: &Vector12) -> Vec<Vector2<f64>> {
        self.rows.iter().map(|pair| pair * t).collect()
    }
}

/// One non-negative quality weight per correspondence.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if let Some(bad) = w.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidParameter(format!("weight {bad} is not a finite non-negative value")));
        }
        Ok(Self(w))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the largest weight, lowest index on ties.
    pub fn argmax(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, &w) in self.0.iter().enumerate() {
            if best.is_none_or(|b| w > self.0[b]) {
                best = Some(i);
            }
        }
        best
    }

    pub fn support(&self) -> usize {
        self.0.iter().filter(|&&w| w > SUPPORT_EPSILON).count()
    }

    pub fn scaled(&self, k: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|w| w * k).collect())
    }
}

/// `Σ_i w_i (X⁽²ⁱ⁻¹⁾ᵀX⁽²ⁱ⁻¹⁾ + X⁽²ⁱ⁾ᵀX⁽²ⁱ⁾)`, accumulated in index order.
pub fn assemble_normal_matrix(sys: &DltSystem, w: &WeightVector) -> Result<Matrix12> {
    if sys.n() != w.len() {
        return Err(Error::DimensionMismatch {
            expected: sys.n(),
            got: w.len(),
        });
    }
    let mut m = Matrix12::zeros();
    for (pair, &wi) in sys.rows.iter().zip(w.as_slice()) {
        let block = pair.transpose() * pair;
        m += block * wi;
    }
    Ok(m)
}

/// Smallest eigenpair of the normal matrix and the raw 3×4 pose it encodes.
#[derive(Debug, Clone, PartialEq)]
pub struct DltSolution {
    /// Unit eigenvector; its largest-magnitude component is positive.
    pub vec_t: Vector12,
    /// `vec_t` reshaped row-major.
    pub raw_t: Matrix3x4<f64>,
    pub smallest_eigenvalue: f64,
    /// Full decomposition of the normal matrix, reused by eigenvector
    /// derivatives.
    pub eigen: SymmetricEigen<12>,
    pub trace: f64,
}

pub fn reshape_pose_vector(v: &Vector12) -> Matrix3x4<f64> {
    Matrix3x4::from_row_slice(v.as_slice())
}

pub fn flatten_pose_matrix(m: &Matrix3x4<f64>) -> Vector12 {
    Vector12::from_iterator(m.transpose().iter().copied())
}

pub fn solve_smallest_eigvec(m: &Matrix12) -> Result<DltSolution> {
    let scale = m.norm().max(1.0);
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite normal matrix".into()));
    }
    let asym = (m - m.transpose()).amax();
    if asym > 1e-9 * scale {
        return Err(Error::InvalidParameter(format!("normal matrix not symmetric ({asym:e})")));
    }
    let eigen = symmetric_eigen(m);
    let trace = m.trace();
    let (lambda0, lambda1) = (eigen.values[0], eigen.values[1]);
    if trace <= 0.0 || lambda1 - lambda0 < 1e-12 * trace {
        return Err(Error::DegenerateEigen { lambda0, lambda1 });
    }
    let mut vec_t: Vector12 = eigen.vectors.column(0).into();
    vec_t.normalize_mut();
    if vec_t[vec_t.iamax()] < 0.0 {
        vec_t = -vec_t;
    }
    Ok(DltSolution {
        raw_t: reshape_pose_vector(&vec_t),
        vec_t,
        smallest_eigenvalue: lambda0,
        eigen,
        trace,
    })
}

/// Projects the raw DLT matrix onto SE(3).
///
/// `R̄ = UΣVᵀ`, `s = 3 / tr Σ`; the sign of `s` is chosen so the most
/// confident correspondence lands in front of the camera, then
/// `R = sign(s)·UVᵀ` and `t = s·t̄`. A reflection is repaired by negating
/// the column of `U` paired with the smallest singular value.
pub fn procrustes_regularize(sol: &DltSolution, w: &WeightVector, corrs: &[Correspondence]) -> Result<Pose> {
    if corrs.len() != w.len() {
        return Err(Error::DimensionMismatch {
            expected: corrs.len(),
            got: w.len(),
        });
    }
    let best = w.argmax().ok_or(Error::Empty("weights"))?;
    procrustes_with_anchor(&sol.raw_t, &corrs[best].point())
}

/// Procrustes step with an explicit cheirality anchor point.
pub fn procrustes_with_anchor(raw_t: &Matrix3x4<f64>, anchor: &Vector3<f64>) -> Result<Pose> {
    let r_bar = raw_t.fixed_view::<3, 3>(0, 0).into_owned();
    let t_bar = raw_t.column(3).into_owned();
    let svd = r_bar.svd(true, true);
    let sigma_trace = svd.singular_values.sum();
    if sigma_trace < 1e-12 {
        return Err(Error::DegenerateRotation(sigma_trace));
    }
    let mut s = 3.0 / sigma_trace;
    let depth_test = raw_t.row(2).dot(&anchor.push(1.0).transpose());
    if s * depth_test == 0.0 {
        return Err(Error::Cheirality);
    }
    if s * depth_test < 0.0 {
        s = -s;
    }
    let (mut u, v_t) = (svd.u.expect("requested U"), svd.v_t.expect("requested Vᵀ"));
    let mut rotation = u * v_t * s.signum();
    if rotation.determinant() < 0.0 {
        let smallest = svd.singular_values.imin();
        let col = -u.column(smallest);
        u.set_column(smallest, &col);
        rotation = u * v_t * s.signum();
    }
    let translation = t_bar * s;
    let pose = Pose::orthonormalized(rotation, translation);
    if pose.transform_point(anchor).z <= 0.0 {
        return Err(Error::Cheirality);
    }
    Ok(pose)
}

/// Everything produced along the weighted DLT path.
#[derive(Debug, Clone)]
pub struct WdltOutput {
    pub pose: Pose,
    pub solution: DltSolution,
    pub system: DltSystem,
    pub correspondences: Vec<Correspondence>,
}

/// normalize → build → assemble → solve → Procrustes.
pub fn wdlt_solve(obs: &[Observation], w: &WeightVector, intr: &CameraIntrinsics) -> Result<Pose> {
    wdlt_solve_detailed(obs, w, intr).map(|out| out.pose)
}

pub fn wdlt_solve_detailed(obs: &[Observation], w: &WeightVector, intr: &CameraIntrinsics) -> Result<WdltOutput> {
    if obs.len() != w.len() {
        return Err(Error::DimensionMismatch {
            expected: obs.len(),
            got: w.len(),
        });
    }
    let support = w.support();
    if support < 7 {
        return Err(Error::InsufficientSupport(support));
    }
    let correspondences = normalize_observations(obs, intr);
    let system = DltSystem::from_correspondences(&correspondences)?;
    let m = assemble_normal_matrix(&system, w)?;
    let solution = solve_smallest_eigvec(&m)?;
    let pose = procrustes_regularize(&solution, w, &correspondences)?;
    Ok(WdltOutput {
        pose,
        solution,
        system,
        correspondences,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RansacOutcome {
    pub pose: Pose,
    /// Consensus set the final pose was refit on, ascending.
    pub inliers: Vec<usize>,
    pub iterations: usize,
}

/// Baseline: 7-point DLT hypotheses scored by reprojection consensus, best
/// hypothesis refit on its inliers with uniform weights.
pub fn ransac_dlt(
    obs: &[Observation],
    intr: &CameraIntrinsics,
    iterations: usize,
    inlier_threshold: f64,
    seed: u64,
) -> Result<RansacOutcome> {
    let n = obs.len();
    if n < 7 {
        return Err(Error::TooFewCorrespondences(n));
    }
    if iterations == 0 {
        return Err(Error::InvalidParameter("RANSAC needs at least one iteration".into()));
    }
    let mut rng = SceneRng::new(seed);
    let mut best: Option<Vec<usize>> = None;
    let mut order: Vec<usize> = (0..n).collect();
    let mut used = 0;
    for _ in 0..iterations {
        used += 1;
        for i in 0..7 {
            let j = i + rng.index(n - i);
            order.swap(i, j);
        }
        let sample: Vec<Observation> = order[..7].iter().map(|&i| obs[i]).collect();
        let Ok(pose) = wdlt_solve(&sample, &WeightVector::uniform(7), intr) else {
            continue;
        };
        let inliers = crate::refine::find_inliers(&pose, obs, intr, inlier_threshold);
        if best.as_ref().is_none_or(|b| inliers.len() > b.len()) {
            let all = inliers.len() == n;
            best = Some(inliers);
            if all {
                break;
            }
        }
    }
    let consensus = best.filter(|b| b.len() >= 7).ok_or(Error::NoConsensus)?;
    let subset: Vec<Observation> = consensus.iter().map(|&i| obs[i]).collect();
    let pose = wdlt_solve(&subset, &WeightVector::uniform(subset.len()), intr)?;
    Ok(RansacOutcome {
        pose,
        inliers: consensus,
        iterations: used,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::pose_error;
    use crate::simulator::{generate_scene, SceneParams};

    fn scene(outliers: f64, pixel: f64, coord: f64, seed: u64) -> crate::simulator::SyntheticScene {
        let p = SceneParams {
            outlier_fraction: outliers,
            pixel_noise_sigma: pixel,
            coord_noise_sigma: coord,
            ..SceneParams::default()
        };
        generate_scene(&p, seed).unwrap()
    }

    #[test]
    fn normalize_pixel_examples() {
        let intr = CameraIntrinsics::vga();
        assert_eq!(normalize_pixel(&Vector2::new(320.0, 240.0), &intr), Vector2::new(0.0, 0.0));
        assert_eq!(normalize_pixel(&Vector2::new(845.0, 240.0), &intr), Vector2::new(1.0, 0.0));
    }

    #[test]
    fn build_rows_examples() {
        let origin = build_rows(&Correspondence::new(Vector3::zeros(), Vector2::zeros()));
        let mut r1 = [0.0; 12];
        r1[3] = 1.0;
        let mut r2 = [0.0; 12];
        r2[7] = 1.0;
        assert_eq!(origin.row(0).iter().copied().collect::<Vec<_>>(), r1);
        assert_eq!(origin.row(1).iter().copied().collect::<Vec<_>>(), r2);

        let rows = build_rows(&Correspondence::new(Vector3::new(1.0, 2.0, 3.0), Vector2::new(0.5, -0.25)));
        let tail: Vec<f64> = rows.row(0).iter().skip(8).copied().collect();
        assert_eq!(tail, vec![-0.5, -1.0, -1.5, -0.5]);
        let tail2: Vec<f64> = rows.row(1).iter().skip(8).copied().collect();
        assert_eq!(tail2, vec![0.25, 0.5, 0.75, 0.25]);
    }

    #[test]
    fn exact_projections_are_in_the_null_space() {
        let sc = scene(0.0, 0.0, 0.0, 1);
        let corrs = normalize_observations(&sc.observations(), &sc.intrinsics);
        let sys = DltSystem::from_correspondences(&corrs).unwrap();
        let t = flatten_pose_matrix(&sc.gt_pose.matrix3x4());
        let r = sys.to_dense() * DMatrix::from_column_slice(12, 1, t.as_slice());
        assert!(r.amax() < 1e-12, "{}", r.amax());
    }

    #[test]
    fn normal_matrix_masks_and_matches_unweighted() {
        let sc = scene(0.3, 0.5, 0.01, 2);
        let corrs = normalize_observations(&sc.observations(), &sc.intrinsics);
        let sys = DltSystem::from_correspondences(&corrs).unwrap();
        let x = sys.to_dense();
        let m = assemble_normal_matrix(&sys, &WeightVector::uniform(sys.n())).unwrap();
        let dense = x.transpose() * &x;
        assert!((DMatrix::from_column_slice(12, 12, m.as_slice()) - dense).amax() < 1e-9);

        let mask: Vec<f64> = sc.outlier_mask.iter().map(|&o| if o { 0.0 } else { 1.0 }).collect();
        let masked = assemble_normal_matrix(&sys, &WeightVector::new(mask).unwrap()).unwrap();
        let kept: Vec<Correspondence> = corrs
            .iter()
            .zip(&sc.outlier_mask)
            .filter(|(_, &o)| !o)
            .map(|(c, _)| *c)
            .collect();
        let sub = DltSystem::from_correspondences(&kept).unwrap();
        let sub_m = assemble_normal_matrix(&sub, &WeightVector::uniform(sub.n())).unwrap();
        assert_eq!(masked, sub_m);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let sc = scene(0.0, 0.0, 0.0, 1);
        let corrs = normalize_observations(&sc.observations(), &sc.intrinsics);
        let sys = DltSystem::from_correspondences(&corrs).unwrap();
        assert!(matches!(
            assemble_normal_matrix(&sys, &WeightVector::uniform(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn diagonal_matrix_smallest_eigvec() {
        let m = Matrix12::from_diagonal(&Vector12::from_iterator((0..12).map(|i| 12.0 - i as f64)));
        let sol = solve_smallest_eigvec(&m).unwrap();
        assert_eq!(sol.smallest_eigenvalue, 1.0);
        assert_eq!(sol.vec_t[11], 1.0);
        assert!((sol.vec_t.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn identity_matrix_is_degenerate() {
        assert!(matches!(
            solve_smallest_eigvec(&Matrix12::identity()),
            Err(Error::DegenerateEigen { .. })
        ));
    }

    #[test]
    fn zero_noise_scene_eigvec_is_ground_truth() {
        let sc = scene(0.0, 0.0, 0.0, 1);
        let corrs = normalize_observations(&sc.observations(), &sc.intrinsics);
        let sys = DltSystem::from_correspondences(&corrs).unwrap();
        let m = assemble_normal_matrix(&sys, &WeightVector::uniform(sys.n())).unwrap();
        let sol = solve_smallest_eigvec(&m).unwrap();
        assert!(sol.smallest_eigenvalue.abs() <= 1e-16 * m.trace(), "{:e} vs trace {:e}", sol.smallest_eigenvalue, m.trace());
        let gt = flatten_pose_matrix(&sc.gt_pose.matrix3x4()).normalize();
        let aligned = if gt.dot(&sol.vec_t) < 0.0 { -gt } else { gt };
        assert!((aligned - sol.vec_t).norm() < 1e-9);
        let residual = m * sol.vec_t - sol.vec_t * sol.smallest_eigenvalue;
        assert!(residual.norm() <= 1e-8 * m.norm());
    }

    fn solution_from_matrix(raw: Matrix3x4<f64>) -> DltSolution {
        let v = flatten_pose_matrix(&raw);
        DltSolution {
            vec_t: v,
            raw_t: raw,
            smallest_eigenvalue: 0.0,
            eigen: symmetric_eigen(&Matrix12::identity()),
            trace: 12.0,
        }
    }

    #[test]
    fn procrustes_recovers_scaled_and_negated_pose() {
        let sc = scene(0.0, 0.0, 0.0, 5);
        let corrs = normalize_observations(&sc.observations(), &sc.intrinsics);
        let w = WeightVector::uniform(corrs.len());
        let truth = sc.gt_pose.matrix3x4();
        for k in [0.37, -0.37, -1.0] {
            let pose = procrustes_regularize(&solution_from_matrix(truth * k), &w, &corrs).unwrap();
            assert!((pose.matrix3x4() - truth).amax() < 1e-9, "scale {k}");
        }
    }

    #[test]
    fn procrustes_output_is_valid_on_noisy_scene() {
        let sc = scene(0.0, 1.0, 0.0, 3);
        let obs = sc.observations();
        let w = WeightVector::uniform(obs.len());
        let out = wdlt_solve_detailed(&obs, &w, &sc.intrinsics).unwrap();
        let (ortho, det) = out.pose.invariant_residuals();
        assert!(ortho < 1e-9 && det < 1e-9);
        let anchor = out.correspondences[w.argmax().unwrap()].point();
        assert!(out.pose.transform_point(&anchor).z > 0.0);
    }

    #[test]
    fn procrustes_rejects_zero_rotation_block() {
        let mut raw = Matrix3x4::zeros();
        raw[(2, 3)] = 1.0;
        assert!(matches!(
            procrustes_with_anchor(&raw, &Vector3::new(0.0, 0.0, 1.0)),
            Err(Error::DegenerateRotation(_))
        ));
    }

    #[test]
    fn wdlt_exact_on_zero_noise() {
        let sc = scene(0.0, 0.0, 0.0, 1);
        let pose = wdlt_solve(&sc.observations(), &WeightVector::uniform(sc.len()), &sc.intrinsics).unwrap();
        let err = pose_error(&pose, &sc.gt_pose);
        assert!(err.translation_error < 1e-6 && err.rotation_error < 1e-6, "{err:?}");
    }

    #[test]
    fn oracle_weights_equal_inlier_only_solve() {
        let sc = scene(0.3, 0.5, 0.01, 1);
        let obs = sc.observations();
        let oracle: Vec<f64> = sc.outlier_mask.iter().map(|&o| if o { 0.0 } else { 1.0 }).collect();
        let weighted = wdlt_solve(&obs, &WeightVector::new(oracle).unwrap(), &sc.intrinsics).unwrap();
        let inliers: Vec<Observation> = obs.iter().zip(&sc.outlier_mask).filter(|(_, &o)| !o).map(|(o, _)| *o).collect();
        let plain = wdlt_solve(&inliers, &WeightVector::uniform(inliers.len()), &sc.intrinsics).unwrap();
        let e = pose_error(&weighted, &plain);
        assert!(e.translation_error < 1e-9 && e.rotation_error < 1e-9, "{e:?}");
    }

    #[test]
    fn uniform_weights_suffer_from_outliers() {
        let sc = scene(0.3, 0.5, 0.01, 1);
        let obs = sc.observations();
        let oracle: Vec<f64> = sc.outlier_mask.iter().map(|&o| if o { 0.0 } else { 1.0 }).collect();
        let good = wdlt_solve(&obs, &WeightVector::new(oracle).unwrap(), &sc.intrinsics).unwrap();
        let bad = wdlt_solve(&obs, &WeightVector::uniform(obs.len()), &sc.intrinsics).unwrap();
        let (eg, eb) = (pose_error(&good, &sc.gt_pose), pose_error(&bad, &sc.gt_pose));
        assert!(eb.translation_error >= 10.0 * eg.translation_error, "{eg:?} {eb:?}");
    }

    #[test]
    fn weight_scaling_leaves_pose_unchanged() {
        let sc = scene(0.3, 0.5, 0.01, 4);
        let obs = sc.observations();
        let w = WeightVector::new((0..obs.len()).map(|i| 0.1 + (i % 7) as f64 * 0.1).collect()).unwrap();
        let base = wdlt_solve(&obs, &w, &sc.intrinsics).unwrap();
        for k in [1e-3, 0.7, 3.0, 250.0] {
            let scaled = wdlt_solve(&obs, &w.scaled(k).unwrap(), &sc.intrinsics).unwrap();
            let e = pose_error(&base, &scaled);
            assert!(e.translation_error < 1e-9 && e.rotation_error < 1e-9, "k={k} {e:?}");
        }
    }

    #[test]
    fn wdlt_requires_support() {
        let sc = scene(0.0, 0.0, 0.0, 1);
        let mut w = vec![0.0; sc.len()];
        w[..6].iter_mut().for_each(|v| *v = 1.0);
        assert!(matches!(
            wdlt_solve(&sc.observations(), &WeightVector::new(w).unwrap(), &sc.intrinsics),
            Err(Error::InsufficientSupport(6))
        ));
    }

    #[test]
    fn ransac_exact_on_clean_scene() {
        let sc = scene(0.0, 0.0, 0.0, 1);
        let out = ransac_dlt(&sc.observations(), &sc.intrinsics, 1, 1.0, 3).unwrap();
        assert_eq!(out.iterations, 1);
        assert_eq!(out.inliers.len(), sc.len());
        let e = pose_error(&out.pose, &sc.gt_pose);
        assert!(e.translation_error < 1e-6 && e.rotation_error < 1e-6);
    }

    #[test]
    fn ransac_consensus_excludes_outliers() {
        let sc = scene(0.3, 0.5, 0.0, 1);
        let out = ransac_dlt(&sc.observations(), &sc.intrinsics, 256, 10.0, 1).unwrap();
        assert!(out.inliers.iter().all(|&i| !sc.outlier_mask[i]));
        assert!(out.inliers.len() >= 60);
    }

    #[test]
    fn ransac_fails_without_consensus() {
        let mut sc = scene(0.0, 0.0, 0.0, 1);
        // Pair every pixel with an unrelated scene coordinate.
        sc.predicted_coords.rotate_left(37);
        let shuffled: Vec<Observation> = sc
            .predicted_coords
            .iter()
            .zip(&sc.pixel_obs)
            .map(|(c, p)| Observation { coord: *c + Vector3::new(0.0, 0.0, 3.0), pixel: *p })
            .collect();
        assert!(matches!(
            ransac_dlt(&shuffled, &sc.intrinsics, 64, 1.0, 1),
            Err(Error::NoConsensus)
        ));
    }
}
