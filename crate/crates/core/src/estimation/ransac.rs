//! Consensus search over minimal 4-point subsets.

use nalgebra::Vector3;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use serde::{Deserialize, Serialize};

use super::lm::{solve_pnp_lm, LmConfig};
use super::EstimationError;
use crate::geometry::{project_point, CameraIntrinsics, PixelPoint, Pose};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RansacConfig {
    pub reproj_threshold: f64,
    /// Sample budget when exhaustive enumeration would exceed it.
    pub max_iters: usize,
    /// LM iterations used to fit each minimal subset.
    pub subset_lm_iters: usize,
    pub seed: u64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self { reproj_threshold: 2.0, max_iters: 200, subset_lm_iters: 10, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RansacResult {
    pub pose: Pose,
    pub inliers: Vec<usize>,
    pub inlier_rms: f64,
    pub subsets_tried: usize,
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Lexicographic 4-subsets of `0..n`.
fn all_quads(n: usize) -> Vec<[usize; 4]> {
    let mut out = Vec::with_capacity(binomial(n, 4));
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                for d in c + 1..n {
                    out.push([a, b, c, d]);
                }
            }
        }
    }
    out
}

/// True when some three of the points are (nearly) collinear, which leaves a
/// planar 4-point pose under-determined.
fn degenerate(object: &[Vector3<f64>], quad: &[usize; 4]) -> bool {
    let scale = quad
        .iter()
        .flat_map(|&i| quad.iter().map(move |&j| (i, j)))
        .map(|(i, j)| (object[i] - object[j]).norm_squared())
        .fold(0.0, f64::max);
    for skip in 0..4 {
        let tri: Vec<usize> = (0..4).filter(|&i| i != skip).map(|i| quad[i]).collect();
        let area2 = (object[tri[1]] - object[tri[0]]).cross(&(object[tri[2]] - object[tri[0]])).norm();
        if area2 <= 1e-6 * scale {
            return true;
        }
    }
    false
}

fn score(k: &CameraIntrinsics, pose: &Pose, object: &[Vector3<f64>], image: &[PixelPoint], threshold: f64) -> (Vec<usize>, f64) {
    let mut inliers = Vec::new();
    let mut sum = 0.0;
    for (i, (p, obs)) in object.iter().zip(image).enumerate() {
        if let Ok(proj) = project_point(k, pose, p) {
            let d2 = (obs.u - proj.u).powi(2) + (obs.v - proj.v).powi(2);
            if d2 <= threshold * threshold {
                inliers.push(i);
                sum += d2;
            }
        }
    }
    let rms = if inliers.is_empty() { f64::INFINITY } else { (sum / inliers.len() as f64).sqrt() };
    (inliers, rms)
}

/// Fits each minimal subset with a short zero-initialized LM run and keeps the
/// model with the most inliers (ties broken by lower inlier RMS). Subsets are
/// enumerated exhaustively when their count fits the budget. The search stops
/// early once every point is an inlier.
pub fn ransac_pnp(
    k: &CameraIntrinsics,
    object: &[Vector3<f64>],
    image: &[PixelPoint],
    cfg: &RansacConfig,
) -> Result<RansacResult, EstimationError> {
    let n = object.len();
    if n != image.len() {
        return Err(EstimationError::CountMismatch { object: n, image: image.len() });
    }
    if n < 4 {
        return Err(EstimationError::TooFewPoints(n));
    }
    let quads: Vec<[usize; 4]> = if binomial(n, 4) <= cfg.max_iters.max(1) {
        all_quads(n)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        (0..cfg.max_iters)
            .map(|_| {
                let mut q: Vec<usize> = sample(&mut rng, n, 4).into_vec();
                q.sort_unstable();
                [q[0], q[1], q[2], q[3]]
            })
            .collect()
    };

    let lm = LmConfig::with_max_iters(cfg.subset_lm_iters);
    let mut best: Option<RansacResult> = None;
    let mut tried = 0;
    for quad in quads {
        if degenerate(object, &quad) {
            continue;
        }
        tried += 1;
        let obj: Vec<Vector3<f64>> = quad.iter().map(|&i| object[i]).collect();
        let img: Vec<PixelPoint> = quad.iter().map(|&i| image[i]).collect();
        let Ok(fit) = solve_pnp_lm(k, &obj, &img, &Pose::zero(), &lm) else {
            continue;
        };
        let (inliers, rms) = score(k, &fit.pose, object, image, cfg.reproj_threshold);
        let better = match &best {
            None => true,
            Some(b) => inliers.len() > b.inliers.len() || (inliers.len() == b.inliers.len() && rms < b.inlier_rms),
        };
        if better {
            best = Some(RansacResult { pose: fit.pose, inliers, inlier_rms: rms, subsets_tried: tried });
        }
        if best.as_ref().is_some_and(|b| b.inliers.len() == n) {
            break;
        }
    }
    match best {
        Some(mut b) if b.inliers.len() >= 4 => {
            b.subsets_tried = tried;
            Ok(b)
        }
        other => Err(EstimationError::NoConsensus { best_inliers: other.map_or(0, |b| b.inliers.len()) }),
    }
}
