//! World model: moving platform, vehicle plant and the placement of the
//! landing pad and cue on the platform.

pub mod platform;
pub mod vehicle;

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

pub use platform::{ramp_profile, PlatformState, Trajectory, TrajectoryError, TrajectoryKind, TrajectorySpec};
pub use vehicle::{command_effectiveness, integrate_hold, vehicle_step, PlantParams, VehicleState};

use crate::estimation::RelativeState;
use crate::geometry::Pose;

/// Pad and cue placement on the platform. The pad surface is the world
/// altitude zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldLayout {
    /// Half the side of the 3 ft square pad, meters.
    pub pad_half_size: f64,
    /// Cue plane distance ahead of the pad center along the direction of travel.
    pub cue_offset: f64,
    /// Cue center height above the pad surface.
    pub cue_height: f64,
}

impl Default for WorldLayout {
    fn default() -> Self {
        Self { pad_half_size: 0.4572, cue_offset: 0.5, cue_height: 0.3 }
    }
}

impl WorldLayout {
    pub fn validate(&self) -> Result<(), String> {
        if self.pad_half_size > 0.0 && self.cue_offset > 0.0 && self.cue_height > 0.0 {
            Ok(())
        } else {
            Err("layout offsets must be positive".into())
        }
    }

    /// Cue center in world NED.
    pub fn cue_center(&self, platform: &PlatformState) -> Vector3<f64> {
        let c = platform.position + self.cue_offset * platform.forward();
        Vector3::new(c.x, c.y, -self.cue_height)
    }

    /// Camera position in the cue frame (x right, y down, z into the board)
    /// and heading relative to the board normal. The camera sits at the
    /// vehicle origin on a leveling gimbal.
    pub fn camera_in_cue(&self, vehicle: &VehicleState, platform: &PlatformState) -> (Vector3<f64>, f64) {
        let d = vehicle.position - self.cue_center(platform);
        let (f, r) = (platform.forward(), platform.right());
        let p = Vector3::new(d.x * r.x + d.y * r.y, d.z, d.x * f.x + d.y * f.y);
        (p, wrap_angle(vehicle.yaw - platform.heading))
    }

    pub fn camera_pose(&self, vehicle: &VehicleState, platform: &PlatformState) -> Pose {
        let (p, heading) = self.camera_in_cue(vehicle, platform);
        Pose::from_camera_state(p, heading)
    }

    /// Ground-truth relative state.
    pub fn true_relative_state(&self, vehicle: &VehicleState, platform: &PlatformState, t: f64) -> RelativeState {
        let (p, yaw) = self.camera_in_cue(vehicle, platform);
        RelativeState { x_side: p.x, y_vert: -p.y, z_fwd: -p.z, yaw, t, fresh: true }
    }

    /// Vehicle offset from the pad center as (forward, sideward) in the pad frame.
    pub fn pad_deviation(&self, vehicle: &VehicleState, platform: &PlatformState) -> (f64, f64) {
        let d = Vector2::new(vehicle.position.x, vehicle.position.y) - platform.position;
        (d.dot(&platform.forward()), d.dot(&platform.right()))
    }

    pub fn on_pad(&self, vehicle: &VehicleState, platform: &PlatformState) -> bool {
        let (f, s) = self.pad_deviation(vehicle, platform);
        f.abs() <= self.pad_half_size && s.abs() <= self.pad_half_size
    }
}

/// Wraps an angle into (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(2.0 * std::f64::consts::PI);
    if w > std::f64::consts::PI {
        w - 2.0 * std::f64::consts::PI
    } else {
        w
    }
}
