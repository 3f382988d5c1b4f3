//! Central-difference checks of the analytic gradients; each returns the
//! worst relative error over `instances` random problems.

use nalgebra::{Vector2, Vector3};
use scwls::adapt::grad_pose_wrt_w;
use scwls::dlt::{assemble_normal_matrix, solve_smallest_eigvec, Correspondence, DltSystem, Vector12, WeightVector};
use scwls::geometry::{CameraIntrinsics, Pose, PoseDelta};
use scwls::losses::{grad_regression_loss_wrt_coords, grad_regression_loss_wrt_w, regression_loss, GroundTruthVector, LossConfig};
use scwls::refine::projection_jacobian;
use scwls::simulator::SceneRng;

const H: f64 = 1e-6;
/// Components this far below the largest one are compared absolutely, at
/// this fraction of the largest; below it central differences are
/// dominated by rounding.
const FLOOR: f64 = 1e-3;

pub fn random_pose(rng: &mut SceneRng) -> Pose {
    let aa = Vector3::new(rng.uniform_in(-0.5, 0.5), rng.uniform_in(-0.5, 0.5), rng.uniform_in(-0.5, 0.5));
    let t = Vector3::new(rng.uniform_in(-0.5, 0.5), rng.uniform_in(-0.5, 0.5), rng.uniform_in(2.0, 4.0));
    Pose::from_axis_angle(aa, t)
}

pub fn random_correspondences(rng: &mut SceneRng, n: usize) -> Vec<Correspondence> {
    (0..n)
        .map(|_| {
            let s = Vector3::new(rng.uniform_in(-1.0, 1.0), rng.uniform_in(-1.0, 1.0), rng.uniform_in(-1.0, 1.0));
            let uv = Vector2::new(rng.uniform_in(-0.6, 0.6), rng.uniform_in(-0.45, 0.45));
            Correspondence::new(s, uv)
        })
        .collect()
}

/// Near-consistent correspondences under `pose`, so the losses sit in the
/// regime the solver sees.
pub fn projected_correspondences(rng: &mut SceneRng, pose: &Pose, n: usize) -> Vec<Correspondence> {
    let c2w = pose.camera_to_world();
    (0..n)
        .map(|_| {
            let uv = Vector2::new(rng.uniform_in(-0.6, 0.6), rng.uniform_in(-0.45, 0.45));
            let depth = rng.uniform_in(1.0, 4.0);
            let cam = Vector3::new(uv.x * depth, uv.y * depth, depth);
            let noise = Vector3::new(rng.normal(), rng.normal(), rng.normal()) * 0.02;
            Correspondence::new(c2w.transform_point(&cam) + noise, uv)
        })
        .collect()
}

pub fn random_weights(rng: &mut SceneRng, n: usize) -> WeightVector {
    WeightVector::new((0..n).map(|_| rng.uniform_in(0.05, 1.0)).collect()).unwrap()
}

pub fn relative(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

pub fn regression_wrt_w(seed: u64, instances: usize) -> f64 {
    let cfg = LossConfig::default();
    let mut rng = SceneRng::new(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let n = 7 + rng.index(40);
        let pose = random_pose(&mut rng);
        let corrs = projected_correspondences(&mut rng, &pose, n);
        let sys = DltSystem::from_correspondences(&corrs).unwrap();
        let w = random_weights(&mut rng, n);
        let t_gt = GroundTruthVector::from_pose(&pose);
        let grad = grad_regression_loss_wrt_w(&sys, &w, &t_gt, &cfg).unwrap();
        let scale = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        let loss = |ws: Vec<f64>| regression_loss(&sys, &WeightVector::new(ws).unwrap(), &t_gt, &cfg).unwrap().value;
        for i in 0..n {
            let mut plus = w.as_slice().to_vec();
            let mut minus = plus.clone();
            plus[i] += H;
            minus[i] -= H;
            let fd = (loss(plus) - loss(minus)) / (2.0 * H);
            worst = worst.max(relative(grad[i], fd, FLOOR * scale));
        }
    }
    worst
}

pub fn regression_wrt_coords(seed: u64, instances: usize) -> f64 {
    let cfg = LossConfig::default();
    let mut rng = SceneRng::new(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let n = 50;
        let pose = random_pose(&mut rng);
        let corrs = projected_correspondences(&mut rng, &pose, n);
        let w = random_weights(&mut rng, n);
        let t_gt = GroundTruthVector::from_pose(&pose);
        let grad = grad_regression_loss_wrt_coords(&corrs, &w, &t_gt, &cfg).unwrap();
        let scale = grad.iter().fold(0.0f64, |m, g| m.max(g.amax()));
        for i in (0..n).step_by(7) {
            for k in 0..3 {
                let shifted = |d: f64| {
                    let mut c = corrs.clone();
                    let mut s = c[i].point();
                    s[k] += d;
                    c[i] = Correspondence::new(s, Vector2::new(c[i].u, c[i].v));
                    regression_loss(&DltSystem::from_correspondences(&c).unwrap(), &w, &t_gt, &cfg)
                        .unwrap()
                        .value
                };
                let fd = (shifted(H) - shifted(-H)) / (2.0 * H);
                worst = worst.max(relative(grad[i][k], fd, FLOOR * scale));
            }
        }
    }
    worst
}

pub fn lm_jacobian(seed: u64, instances: usize) -> f64 {
    let intr = CameraIntrinsics::vga();
    let project = |pose: &Pose, s: &Vector3<f64>| intr.project(&pose.transform_point(s)).unwrap();
    let mut rng = SceneRng::new(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let pose = random_pose(&mut rng);
        let cam = Vector3::new(rng.uniform_in(-1.0, 1.0), rng.uniform_in(-0.8, 0.8), rng.uniform_in(1.0, 5.0));
        let s = pose.camera_to_world().transform_point(&cam);
        let j = projection_jacobian(&pose, &intr, &s).unwrap();
        let scale = j.amax();
        for k in 0..6 {
            let mut d = [0.0; 6];
            d[k] = H;
            let plus = project(&pose.retract(&PoseDelta::from_slice(&d)), &s);
            d[k] = -H;
            let minus = project(&pose.retract(&PoseDelta::from_slice(&d)), &s);
            let fd = (plus - minus) / (2.0 * H);
            for r in 0..2 {
                worst = worst.max(relative(j[(r, k)], fd[r], FLOOR * scale));
            }
        }
    }
    worst
}

pub fn eigenvector_sensitivity(seed: u64, instances: usize) -> f64 {
    let mut rng = SceneRng::new(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let n = 20 + rng.index(40);
        let pose = random_pose(&mut rng);
        let corrs = projected_correspondences(&mut rng, &pose, n);
        let sys = DltSystem::from_correspondences(&corrs).unwrap();
        let w = random_weights(&mut rng, n);
        let sol = solve_smallest_eigvec(&assemble_normal_matrix(&sys, &w).unwrap()).unwrap();
        let grads = grad_pose_wrt_w(&sys, &w, &sol).unwrap();
        let solve = |ws: Vec<f64>| -> Vector12 {
            solve_smallest_eigvec(&assemble_normal_matrix(&sys, &WeightVector::new(ws).unwrap()).unwrap())
                .unwrap()
                .vec_t
        };
        for i in [0, n / 3, n - 1] {
            let mut plus = w.as_slice().to_vec();
            let mut minus = plus.clone();
            plus[i] += H;
            minus[i] -= H;
            let fd = (solve(plus) - solve(minus)) / (2.0 * H);
            worst = worst.max((fd - grads[i]).norm() / grads[i].norm().max(1e-12));
        }
    }
    worst
}
