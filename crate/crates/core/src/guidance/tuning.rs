//! Linearized single-axis loop used to sanity-check gain changes before
//! running full episodes.

use super::pid::{pid_step, PidGains, PidState};

/// Horizontal axis linearized about hover: command percent → tilt through a
/// first-order lag, tilt → acceleration, linear drag on velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisModel {
    /// Acceleration per percent of command at steady tilt, m/s² per %.
    pub accel_per_pct: f64,
    pub tau: f64,
    /// Linear drag coefficient, 1/s.
    pub damping: f64,
    /// Controller period, seconds.
    pub outer_dt: f64,
    pub inner_dt: f64,
}

impl Default for AxisModel {
    fn default() -> Self {
        // g·tan(25°)/100 from the plant's tilt limit
        Self { accel_per_pct: 9.81 * 25f64.to_radians().tan() / 100.0, tau: 0.15, damping: 0.0, outer_dt: 0.1, inner_dt: 0.005 }
    }
}

/// Position trace of a unit step in setpoint, sampled at the controller rate.
pub fn step_response(model: &AxisModel, gains: &PidGains, step: f64, duration: f64) -> Vec<(f64, f64)> {
    let mut pid = PidState::default();
    let (mut x, mut v, mut u_lag) = (0.0, 0.0, 0.0);
    let substeps = (model.outer_dt / model.inner_dt).round().max(1.0) as usize;
    let h = model.outer_dt / substeps as f64;
    let ticks = (duration / model.outer_dt).ceil() as usize;
    let mut out = Vec::with_capacity(ticks + 1);
    for i in 0..=ticks {
        let t = i as f64 * model.outer_dt;
        out.push((t, x));
        let u = pid_step(&mut pid, gains, step, x, model.outer_dt);
        for _ in 0..substeps {
            u_lag += h * (u - u_lag) / model.tau;
            let a = model.accel_per_pct * u_lag - model.damping * v;
            x += h * v;
            v += h * a;
        }
    }
    out
}

/// 10–90 % rise time of a trace toward `target`; None if 90 % is never reached.
pub fn rise_time(trace: &[(f64, f64)], target: f64) -> Option<f64> {
    let crossing = |frac: f64| trace.iter().find(|(_, x)| x / target >= frac).map(|(t, _)| *t);
    Some(crossing(0.9)? - crossing(0.1)?)
}
