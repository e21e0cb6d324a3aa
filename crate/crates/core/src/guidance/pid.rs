//! PID law with derivative-on-measurement and a clamped integral term.

use serde::{Deserialize, Serialize};

/// Bound on the integral contribution `|ki·∫e|`, percent.
pub const INTEGRAL_CLAMP: f64 = 50.0;
pub const OUTPUT_LIMIT: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Integrate only while `|e|` is within this band. Keeps large transients
    /// from winding up an integral sized for small steady offsets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub i_zone: Option<f64>,
}

impl PidGains {
    pub const fn new(kp: f64, ki: f64, kd: f64) -> Self {
        Self { kp, ki, kd, i_zone: None }
    }

    pub const fn with_i_zone(self, zone: f64) -> Self {
        Self { i_zone: Some(zone), ..self }
    }

    pub fn is_valid(&self) -> bool {
        [self.kp, self.ki, self.kd].iter().all(|g| g.is_finite() && *g >= 0.0) && self.i_zone.is_none_or(|z| z > 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PidState {
    pub integral: f64,
    pub prev_measurement: Option<f64>,
}

impl PidState {
    /// Forgets the last measurement so the next step has no derivative kick.
    pub fn break_derivative(&mut self) {
        self.prev_measurement = None;
    }

    /// Rescales the integral so `ki·∫e` is unchanged across a gain switch.
    pub fn transfer(&mut self, from: &PidGains, to: &PidGains) {
        if to.ki > 0.0 {
            self.integral *= from.ki / to.ki;
        } else {
            self.integral = 0.0;
        }
    }

    /// Current integral contribution, percent.
    pub fn integral_term(&self, gains: &PidGains) -> f64 {
        gains.ki * self.integral
    }
}

/// One controller update. `e = setpoint − measurement`; the derivative acts on
/// the measurement only, so setpoint changes do not kick.
pub fn pid_step(state: &mut PidState, gains: &PidGains, setpoint: f64, measurement: f64, dt: f64) -> f64 {
    assert!(dt > 0.0, "pid step needs a positive dt");
    let e = setpoint - measurement;
    if gains.i_zone.is_none_or(|z| e.abs() <= z) {
        state.integral += e * dt;
    }
    if gains.ki > 0.0 {
        let limit = INTEGRAL_CLAMP / gains.ki;
        state.integral = state.integral.clamp(-limit, limit);
    }
    let derivative = match state.prev_measurement {
        Some(prev) => -(measurement - prev) / dt,
        None => 0.0,
    };
    state.prev_measurement = Some(measurement);
    (gains.kp * e + gains.ki * state.integral + gains.kd * derivative).clamp(-OUTPUT_LIMIT, OUTPUT_LIMIT)
}
