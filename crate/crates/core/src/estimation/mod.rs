//! Pose estimation from corner observations and conversion to the relative
//! state consumed by the controller.

pub mod filter;
pub mod lm;
pub mod ransac;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use filter::{moving_average_update, FilterConfig, MovingAverageFilter};
pub use lm::{projection_jacobian, reprojection_error, solve_pnp_lm, LmConfig, PnPResult};
pub use ransac::{ransac_pnp, RansacConfig, RansacResult};

use crate::detection::CornerObservation;
use crate::geometry::{camera_position_in_cue, leveled_pose, relative_heading, CameraIntrinsics, CueModel, GeometryError, PixelPoint, Pose, rodrigues_to_matrix};

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum EstimationError {
    #[error("{object} object points but {image} image points")]
    CountMismatch { object: usize, image: usize },
    #[error("pose needs at least 4 points, got {0}")]
    TooFewPoints(usize),
    #[error("a point lies behind the camera")]
    BehindCamera,
    #[error("no consensus: best model has {best_inliers} inliers")]
    NoConsensus { best_inliers: usize },
    #[error("estimated pose places the camera behind the cue")]
    BehindCue,
    #[error(transparent)]
    Geometry(GeometryError),
}

impl From<GeometryError> for EstimationError {
    fn from(e: GeometryError) -> Self {
        match e {
            GeometryError::BehindCamera { .. } => EstimationError::BehindCamera,
            other => EstimationError::Geometry(other),
        }
    }
}

/// Camera position and heading relative to the cue, in controller terms.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RelativeState {
    /// Camera to the right of the cue center, meters.
    pub x_side: f64,
    /// Camera above the cue center, meters.
    pub y_vert: f64,
    /// Distance in front of the cue plane, meters.
    pub z_fwd: f64,
    /// Relative heading, radians, positive with the nose turned right.
    pub yaw: f64,
    pub t: f64,
    pub fresh: bool,
}

impl RelativeState {
    /// Reads the state off an estimated pose. Distances use the leveled
    /// (heading-only) rotation, since the gimbal holds pitch and roll at zero.
    pub fn from_pose(pose: &Pose, t: f64) -> Self {
        let level = leveled_pose(pose);
        let p = camera_position_in_cue(&level);
        Self { x_side: p.x, y_vert: -p.y, z_fwd: -p.z, yaw: relative_heading(pose), t, fresh: true }
    }

    /// Cue-frame camera position corresponding to this state.
    pub fn position_in_cue(&self) -> Vector3<f64> {
        Vector3::new(self.x_side, -self.y_vert, -self.z_fwd)
    }

    /// The same values marked as carried over from an earlier tick.
    pub fn stale(&self, t: f64) -> Self {
        Self { t, fresh: false, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorConfig {
    pub ransac: RansacConfig,
    pub lm: LmConfig,
}

/// Two-stage PnP: consensus over minimal subsets, then a full LM refinement
/// on the inliers starting from the consensus pose.
pub fn estimate_pose(obs: &CornerObservation, cue: &CueModel, k: &CameraIntrinsics, cfg: &EstimatorConfig) -> Result<PnPResult, EstimationError> {
    let object = &cue.corner_points;
    let image = &obs.corners;
    let consensus = ransac_pnp(k, object, image, &cfg.ransac)?;
    let obj: Vec<Vector3<f64>> = consensus.inliers.iter().map(|&i| object[i]).collect();
    let img: Vec<PixelPoint> = consensus.inliers.iter().map(|&i| image[i]).collect();
    let mut result = solve_pnp_lm(k, &obj, &img, &consensus.pose, &cfg.lm)?;
    // an oblique planar target has a second, mirrored minimum; start once
    // from its neighborhood and keep the better fit
    if let Ok(alt) = solve_pnp_lm(k, &obj, &img, &mirrored_pose(&result.pose, &obj), &cfg.lm) {
        if alt.reproj_rms < result.reproj_rms {
            result = alt;
        }
    }
    result.inliers = consensus.inliers;
    Ok(result)
}

/// Reflects the target normal about the line of sight to the target center,
/// with the in-plane half turn that keeps the projected pattern upright.
pub fn mirrored_pose(pose: &Pose, object: &[Vector3<f64>]) -> Pose {
    let center = object.iter().sum::<Vector3<f64>>() / object.len() as f64;
    let sight = pose.transform(&center).normalize();
    let half_turn_sight = rodrigues_to_matrix(&(std::f64::consts::PI * sight));
    let half_turn_normal = rodrigues_to_matrix(&Vector3::new(0.0, 0.0, std::f64::consts::PI));
    let rotation = half_turn_sight * pose.rotation * half_turn_normal;
    // keep the target center where it was
    let translation = pose.transform(&center) - rotation * center;
    Pose { rotation, translation }
}

pub fn estimate_relative_state(
    obs: &CornerObservation,
    cue: &CueModel,
    k: &CameraIntrinsics,
    t: f64,
    cfg: &EstimatorConfig,
) -> Result<(RelativeState, PnPResult), EstimationError> {
    let result = estimate_pose(obs, cue, k, cfg)?;
    let state = RelativeState::from_pose(&result.pose, t);
    if state.z_fwd <= 0.0 {
        return Err(EstimationError::BehindCue);
    }
    Ok((state, result))
}

/// Per-tick estimation outcome for logging.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateRecord {
    pub state: RelativeState,
    pub reproj_rms: f64,
    pub inliers: usize,
}

/// Stateful wrapper that carries the last good estimate forward (marked
/// stale) when a tick has no detection or the solver fails.
#[derive(Debug, Clone)]
pub struct Estimator {
    pub k: CameraIntrinsics,
    pub cue: CueModel,
    pub cfg: EstimatorConfig,
    last: RelativeState,
}

impl Estimator {
    pub fn new(k: CameraIntrinsics, cue: CueModel, cfg: EstimatorConfig) -> Self {
        Self { k, cue, cfg, last: RelativeState::default() }
    }

    pub fn last(&self) -> &RelativeState {
        &self.last
    }

    pub fn update(&mut self, obs: Option<&CornerObservation>, t: f64) -> EstimateRecord {
        if let Some(obs) = obs {
            if let Ok((state, result)) = estimate_relative_state(obs, &self.cue, &self.k, t, &self.cfg) {
                self.last = state;
                return EstimateRecord { state, reproj_rms: result.reproj_rms, inliers: result.inliers.len() };
            }
        }
        EstimateRecord { state: self.last.stale(t), reproj_rms: f64::NAN, inliers: 0 }
    }
}
