//! Simplified multirotor response to percentage stick commands. The attitude
//! loop is modeled as first-order lags; translation follows from tilt, drag
//! and a trimmed vertical channel.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::guidance::ControlCommand;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantParams {
    pub tilt_max_deg: f64,
    pub tau_att: f64,
    pub yaw_rate_max_deg: f64,
    pub tau_yaw: f64,
    /// Vertical acceleration at full throttle, m/s².
    pub a_v_max: f64,
    /// Quadratic horizontal drag, 1/m.
    pub c_d: f64,
    /// Linear vertical damping, 1/s.
    pub k_v: f64,
    pub gravity: f64,
    pub dt_inner: f64,
}

impl Default for PlantParams {
    fn default() -> Self {
        Self {
            tilt_max_deg: 25.0,
            tau_att: 0.15,
            yaw_rate_max_deg: 90.0,
            tau_yaw: 0.2,
            a_v_max: 4.0,
            c_d: 0.0315,
            k_v: 1.2,
            gravity: 9.81,
            dt_inner: 0.005,
        }
    }
}

impl PlantParams {
    pub fn validate(&self) -> Result<(), String> {
        let checks = [
            ("tilt_max_deg", self.tilt_max_deg > 0.0 && self.tilt_max_deg < 90.0),
            ("tau_att", self.tau_att > 0.0),
            ("yaw_rate_max_deg", self.yaw_rate_max_deg > 0.0),
            ("tau_yaw", self.tau_yaw > 0.0),
            ("a_v_max", self.a_v_max > 0.0),
            ("c_d", self.c_d >= 0.0),
            ("k_v", self.k_v >= 0.0),
            ("gravity", self.gravity > 0.0),
            ("dt_inner", self.dt_inner > 0.0 && self.dt_inner <= 0.01),
        ];
        match checks.iter().find(|(_, ok)| !ok) {
            Some((name, _)) => Err(format!("plant parameter {name} out of range")),
            None => Ok(()),
        }
    }

    pub fn tilt_max(&self) -> f64 {
        self.tilt_max_deg.to_radians()
    }

    /// Level-flight speed at full tilt, where drag balances thrust tilt.
    pub fn terminal_speed(&self) -> f64 {
        (self.gravity * self.tilt_max().tan() / self.c_d).sqrt()
    }
}

/// Vehicle state in the world NED frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub roll: f64,
    pub pitch: f64,
    /// Heading, radians clockwise from north.
    pub yaw: f64,
    pub yaw_rate: f64,
}

impl VehicleState {
    pub fn altitude(&self) -> f64 {
        -self.position.z
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().chain(self.velocity.iter()).chain([self.roll, self.pitch, self.yaw, self.yaw_rate].iter()).all(|v| v.is_finite())
    }
}

/// Roll and yaw authority left while pitch is pushed toward its limit.
pub fn command_effectiveness(cmd: &ControlCommand) -> f64 {
    (1.0 - 0.7 * ((cmd.pitch.abs() - 80.0) / 20.0).max(0.0)).clamp(0.3, 1.0)
}

/// One explicit Euler step of length `dt` with the command held.
pub fn vehicle_step(state: &VehicleState, cmd: &ControlCommand, params: &PlantParams, dt: f64) -> VehicleState {
    assert!(dt > 0.0 && dt <= 0.01, "inner step must be in (0, 0.01] s");
    let cmd = cmd.clamped();
    let eta = command_effectiveness(&cmd);
    let tilt_max = params.tilt_max();
    let pitch_c = cmd.pitch / 100.0 * tilt_max;
    let roll_c = eta * cmd.roll / 100.0 * tilt_max;
    let rate_c = eta * cmd.yaw / 100.0 * params.yaw_rate_max_deg.to_radians();

    let s = state;
    let (c, sn) = (s.yaw.cos(), s.yaw.sin());
    let a_fwd = params.gravity * s.pitch.tan();
    let a_right = params.gravity * s.roll.tan();
    let v_h = Vector3::new(s.velocity.x, s.velocity.y, 0.0);
    let drag = params.c_d * v_h.norm() * v_h;
    let a_up = cmd.throttle / 100.0 * params.a_v_max + params.k_v * s.velocity.z;
    let accel = Vector3::new(c * a_fwd - sn * a_right - drag.x, sn * a_fwd + c * a_right - drag.y, -a_up);

    VehicleState {
        position: s.position + dt * s.velocity,
        velocity: s.velocity + dt * accel,
        roll: s.roll + dt * (roll_c - s.roll) / params.tau_att,
        pitch: s.pitch + dt * (pitch_c - s.pitch) / params.tau_att,
        yaw: s.yaw + dt * s.yaw_rate,
        yaw_rate: s.yaw_rate + dt * (rate_c - s.yaw_rate) / params.tau_yaw,
    }
}

/// Holds `cmd` for `duration`, stepping at the configured inner rate. Stops
/// early at ground contact (altitude ≤ `ground`) and returns the elapsed
/// time of contact.
pub fn integrate_hold(state: &VehicleState, cmd: &ControlCommand, params: &PlantParams, duration: f64, ground: f64) -> (VehicleState, Option<f64>) {
    let n = (duration / params.dt_inner).round().max(1.0) as usize;
    let h = duration / n as f64;
    let mut s = *state;
    for i in 0..n {
        s = vehicle_step(&s, cmd, params, h);
        if s.altitude() <= ground {
            return (s, Some((i + 1) as f64 * h));
        }
    }
    (s, None)
}
