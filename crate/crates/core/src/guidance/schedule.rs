//! Gain levels switched by forward distance, sideward distance and heading.

use serde::{Deserialize, Serialize};

use super::pid::PidGains;
use super::Setpoints;
use crate::estimation::RelativeState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GainLevels {
    /// 1 (far) to 3 (close).
    pub pitch: u8,
    /// 1 (far) or 2 (close).
    pub roll: u8,
    /// 1 (large heading error, yaw takes priority) or 2.
    pub yaw: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GainSchedule {
    pub pitch: [PidGains; 3],
    /// Forward-error switch distances between pitch levels 1/2 and 2/3, meters.
    pub pitch_switch: [f64; 2],
    pub roll: [PidGains; 2],
    pub roll_switch: f64,
    pub yaw: [PidGains; 2],
    /// Heading error separating yaw levels, degrees.
    pub yaw_switch_deg: f64,
    pub throttle: PidGains,
}

impl Default for GainSchedule {
    /// Gains in percent per meter (pitch, roll, throttle) and percent per
    /// degree (yaw).
    fn default() -> Self {
        Self {
            pitch: [PidGains::new(20.0, 1.0, 25.0), PidGains::new(6.0, 0.5, 40.0), PidGains::new(60.0, 1.0, 200.0)],
            pitch_switch: [6.0, 1.5],
            roll: [PidGains::new(3.0, 0.3, 7.5), PidGains::new(10.0, 2.0, 25.0).with_i_zone(0.4)],
            roll_switch: 1.5,
            yaw: [PidGains::new(0.6, 0.0, 0.5), PidGains::new(1.0, 2.0, 2.0).with_i_zone(8.0)],
            yaw_switch_deg: 15.0,
            throttle: PidGains::new(20.0, 2.0, 10.0),
        }
    }
}

impl GainSchedule {
    pub fn validate(&self) -> Result<(), &'static str> {
        if !(self.pitch_switch[0] > self.pitch_switch[1] && self.pitch_switch[1] > 0.0) {
            return Err("pitch switch distances must be strictly decreasing and positive");
        }
        if !(self.roll_switch > 0.0 && self.yaw_switch_deg > 0.0) {
            return Err("roll and yaw switch thresholds must be positive");
        }
        let all = self.pitch.iter().chain(&self.roll).chain(&self.yaw).chain(std::iter::once(&self.throttle));
        if !all.clone().all(PidGains::is_valid) {
            return Err("gains must be finite and non-negative");
        }
        Ok(())
    }

    pub fn pitch_gains(&self, level: u8) -> &PidGains {
        &self.pitch[(level.clamp(1, 3) - 1) as usize]
    }

    pub fn roll_gains(&self, level: u8) -> &PidGains {
        &self.roll[(level.clamp(1, 2) - 1) as usize]
    }

    pub fn yaw_gains(&self, level: u8) -> &PidGains {
        &self.yaw[(level.clamp(1, 2) - 1) as usize]
    }
}

/// Levels for the current state. Boundaries are closed on the precise side:
/// a forward error of exactly 1.5 m is level 3.
pub fn select_gain_levels(rs: &RelativeState, sp: &Setpoints, schedule: &GainSchedule) -> GainLevels {
    let z_err = rs.z_fwd - sp.z_fwd;
    let pitch = if z_err > schedule.pitch_switch[0] {
        1
    } else if z_err > schedule.pitch_switch[1] {
        2
    } else {
        3
    };
    let roll = if (rs.x_side - sp.x_side).abs() > schedule.roll_switch { 1 } else { 2 };
    let yaw = if (rs.yaw - sp.yaw).abs().to_degrees() > schedule.yaw_switch_deg { 1 } else { 2 };
    GainLevels { pitch, roll, yaw }
}
