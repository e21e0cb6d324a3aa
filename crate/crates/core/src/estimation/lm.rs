//! Levenberg–Marquardt PnP over (Rodrigues vector, translation).

use nalgebra::{Matrix3, Matrix6, Vector2, Vector3, Vector6};

use serde::{Deserialize, Serialize};

use super::EstimationError;
use crate::geometry::{project_point, rodrigues_to_matrix, skew, CameraIntrinsics, PixelPoint, Pose, MIN_DEPTH};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LmConfig {
    pub initial_lambda: f64,
    pub max_iters: usize,
    pub step_tol: f64,
    pub rms_change_tol: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self { initial_lambda: 1e-3, max_iters: 200, step_tol: 1e-10, rms_change_tol: 1e-12 }
    }
}

impl LmConfig {
    pub fn with_max_iters(max_iters: usize) -> Self {
        Self { max_iters, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PnPResult {
    pub pose: Pose,
    pub inliers: Vec<usize>,
    pub reproj_rms: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after the initial guess and after every accepted step.
    pub cost_history: Vec<f64>,
}

/// Per-point residuals `observed − projected` and their RMS norm.
pub fn reprojection_error(
    pose: &Pose,
    k: &CameraIntrinsics,
    object: &[Vector3<f64>],
    image: &[PixelPoint],
) -> Result<(Vec<Vector2<f64>>, f64), EstimationError> {
    if object.len() != image.len() || object.is_empty() {
        return Err(EstimationError::CountMismatch { object: object.len(), image: image.len() });
    }
    let mut residuals = Vec::with_capacity(object.len());
    let mut sum = 0.0;
    for (p, obs) in object.iter().zip(image) {
        let proj = project_point(k, pose, p)?;
        let r = Vector2::new(obs.u - proj.u, obs.v - proj.v);
        sum += r.norm_squared();
        residuals.push(r);
    }
    Ok((residuals, (sum / object.len() as f64).sqrt()))
}

/// Derivatives of `R(v)` with respect to each Rodrigues component.
pub fn rotation_derivatives(v: &Vector3<f64>) -> [Matrix3<f64>; 3] {
    let theta2 = v.norm_squared();
    let basis = [Vector3::x(), Vector3::y(), Vector3::z()];
    if theta2 < 1e-16 {
        return basis.map(|e| skew(&e));
    }
    let r = rodrigues_to_matrix(v);
    let i_minus_r = Matrix3::identity() - r;
    basis.map(|e| {
        let vi = v.dot(&e);
        (skew(v) * vi + skew(&v.cross(&(i_minus_r * e)))) / theta2 * r
    })
}

/// Jacobian of the projected pixel of `p` with respect to
/// `(r1, r2, r3, t1, t2, t3)`, as two rows (u, v).
pub fn projection_jacobian(k: &CameraIntrinsics, params: &Vector6<f64>, p: &Vector3<f64>) -> Result<[Vector6<f64>; 2], EstimationError> {
    let rv = Vector3::new(params[0], params[1], params[2]);
    let t = Vector3::new(params[3], params[4], params[5]);
    let r = rodrigues_to_matrix(&rv);
    let pc = r * p + t;
    if pc.z <= MIN_DEPTH {
        return Err(EstimationError::BehindCamera);
    }
    let (x, y, z) = (pc.x, pc.y, pc.z);
    let du = Vector3::new(k.fx / z, 0.0, -k.fx * x / (z * z));
    let dv = Vector3::new(0.0, k.fy / z, -k.fy * y / (z * z));
    let dr = rotation_derivatives(&rv);
    let mut ju = Vector6::zeros();
    let mut jv = Vector6::zeros();
    for i in 0..3 {
        let dp = dr[i] * p;
        ju[i] = du.dot(&dp);
        jv[i] = dv.dot(&dp);
    }
    for i in 0..3 {
        ju[3 + i] = du[i];
        jv[3 + i] = dv[i];
    }
    Ok([ju, jv])
}

fn params_of(pose: &Pose) -> Vector6<f64> {
    let r = pose.rodrigues();
    Vector6::new(r.x, r.y, r.z, pose.translation.x, pose.translation.y, pose.translation.z)
}

fn pose_of(params: &Vector6<f64>) -> Pose {
    Pose::from_rodrigues(&Vector3::new(params[0], params[1], params[2]), Vector3::new(params[3], params[4], params[5]))
}

fn cost(k: &CameraIntrinsics, params: &Vector6<f64>, object: &[Vector3<f64>], image: &[PixelPoint]) -> Option<f64> {
    let pose = pose_of(params);
    let mut sum = 0.0;
    for (p, obs) in object.iter().zip(image) {
        let proj = project_point(k, &pose, p).ok()?;
        sum += (obs.u - proj.u).powi(2) + (obs.v - proj.v).powi(2);
    }
    Some(sum)
}

/// Places the camera on the ray through the image centroid when the starting
/// pose puts some point at or behind the lens, as the all-zero start does.
/// Depth comes from the ratio of object extent to image extent.
pub fn seed_depth(k: &CameraIntrinsics, initial: &Pose, object: &[Vector3<f64>], image: &[PixelPoint]) -> Pose {
    if object.iter().all(|p| initial.transform(p).z > MIN_DEPTH) {
        return *initial;
    }
    let span = |n: usize, d: &dyn Fn(usize, usize) -> f64| {
        let mut m: f64 = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                m = m.max(d(i, j));
            }
        }
        m
    };
    let obj_span = span(object.len(), &|i, j| (object[i] - object[j]).norm());
    let img_span = span(image.len(), &|i, j| image[i].dist(&image[j]));
    let depth = if img_span > 0.0 { k.fx * obj_span / img_span } else { 1.0 }.max(1e-3);
    let n = image.len() as f64;
    let (cu, cv) = image.iter().fold((0.0, 0.0), |(a, b), p| (a + p.u, b + p.v));
    let (cu, cv) = (cu / n, cv / n);
    let oc = object.iter().fold(Vector3::zeros(), |a, p| a + p) / n;
    let ray = Vector3::new((cu - k.u0) / k.fx * depth, (cv - k.v0) / k.fy * depth, depth);
    Pose { rotation: initial.rotation, translation: ray - initial.rotation * oc }
}

/// Minimizes the summed squared reprojection error starting from `initial`.
/// Returns the best pose found; `converged` is false when the iteration
/// budget ran out first.
pub fn solve_pnp_lm(
    k: &CameraIntrinsics,
    object: &[Vector3<f64>],
    image: &[PixelPoint],
    initial: &Pose,
    cfg: &LmConfig,
) -> Result<PnPResult, EstimationError> {
    if object.len() != image.len() {
        return Err(EstimationError::CountMismatch { object: object.len(), image: image.len() });
    }
    if object.len() < 4 {
        return Err(EstimationError::TooFewPoints(object.len()));
    }
    let start = seed_depth(k, initial, object, image);
    let mut params = params_of(&start);
    let n = object.len() as f64;
    let mut current = cost(k, &params, object, image).ok_or(EstimationError::BehindCamera)?;
    let mut history = vec![current];
    let mut lambda = cfg.initial_lambda;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        iterations += 1;
        let pose = pose_of(&params);
        let mut jtj = Matrix6::zeros();
        let mut jtr = Vector6::zeros();
        for (p, obs) in object.iter().zip(image) {
            let [ju, jv] = projection_jacobian(k, &params, p)?;
            let proj = project_point(k, &pose, p)?;
            jtj += ju * ju.transpose() + jv * jv.transpose();
            jtr += ju * (obs.u - proj.u) + jv * (obs.v - proj.v);
        }
        if jtr.amax() == 0.0 {
            converged = true;
            break;
        }
        let diag_floor = 1e-12 * jtj.diagonal().max().max(1e-300);
        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj;
            for i in 0..6 {
                a[(i, i)] += lambda * jtj[(i, i)].max(diag_floor);
            }
            let Some(chol) = a.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let step = chol.solve(&jtr);
            if step.amax() < cfg.step_tol {
                converged = true;
                break;
            }
            let candidate = params + step;
            match cost(k, &candidate, object, image) {
                Some(c) if c < current => {
                    let rms_change = ((current / n).sqrt() - (c / n).sqrt()).abs();
                    params = candidate;
                    current = c;
                    history.push(c);
                    lambda = (lambda / 10.0).max(1e-12);
                    accepted = true;
                    if rms_change < cfg.rms_change_tol {
                        converged = true;
                    }
                    break;
                }
                _ => {
                    lambda *= 10.0;
                    if iterations >= cfg.max_iters {
                        break;
                    }
                    iterations += 1;
                }
            }
        }
        if converged {
            break;
        }
        if !accepted {
            if lambda >= 1e16 {
                // no descent direction left at any damping: a local minimum
                converged = true;
            }
            break;
        }
    }

    let pose = pose_of(&params);
    Ok(PnPResult {
        pose,
        inliers: (0..object.len()).collect(),
        reproj_rms: (current / n).sqrt(),
        iterations,
        converged,
        cost_history: history,
    })
}
