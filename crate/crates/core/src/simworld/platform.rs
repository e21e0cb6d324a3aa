//! Moving landing-platform trajectories. All kinds start from rest and
//! accelerate at a fixed rate up to their cruise speed, then follow their
//! path at constant arc-length rate.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_RAMP_ACCEL: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum TrajectoryError {
    #[error("speed must be finite and non-negative, got {0}")]
    Speed(f64),
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrajectoryKind {
    Line { speed: f64 },
    SPattern { speed: f64, amplitude: f64, wavelength: f64 },
    /// Clockwise seen from above, i.e. a constant right turn.
    Circle { speed: f64, radius: f64 },
}

impl TrajectoryKind {
    pub fn speed(&self) -> f64 {
        match *self {
            TrajectoryKind::Line { speed } | TrajectoryKind::SPattern { speed, .. } | TrajectoryKind::Circle { speed, .. } => speed,
        }
    }

    pub fn s_pattern(speed: f64) -> Self {
        TrajectoryKind::SPattern { speed, amplitude: 2.0, wavelength: 16.0 }
    }

    pub fn circle(speed: f64) -> Self {
        TrajectoryKind::Circle { speed, radius: 10.0 }
    }

    /// Same path shape at a different cruise speed.
    pub fn with_speed(self, speed: f64) -> Self {
        match self {
            TrajectoryKind::Line { .. } => TrajectoryKind::Line { speed },
            TrajectoryKind::SPattern { amplitude, wavelength, .. } => TrajectoryKind::SPattern { speed, amplitude, wavelength },
            TrajectoryKind::Circle { radius, .. } => TrajectoryKind::Circle { speed, radius },
        }
    }
}

/// Horizontal platform state in the world NED frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlatformState {
    /// Pad center, north/east meters.
    pub position: Vector2<f64>,
    pub velocity: Vector2<f64>,
    /// Direction of travel, radians clockwise from north.
    pub heading: f64,
}

impl PlatformState {
    pub fn forward(&self) -> Vector2<f64> {
        Vector2::new(self.heading.cos(), self.heading.sin())
    }

    pub fn right(&self) -> Vector2<f64> {
        Vector2::new(-self.heading.sin(), self.heading.cos())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrajectorySpec {
    #[serde(flatten)]
    pub kind: TrajectoryKind,
    pub start: [f64; 2],
    pub start_heading: f64,
    pub ramp_accel: f64,
}

impl Default for TrajectorySpec {
    fn default() -> Self {
        Self { kind: TrajectoryKind::Line { speed: 0.5 }, start: [0.0, 0.0], start_heading: 0.0, ramp_accel: DEFAULT_RAMP_ACCEL }
    }
}

impl TrajectorySpec {
    pub fn new(kind: TrajectoryKind) -> Self {
        Self { kind, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), TrajectoryError> {
        let speed = self.kind.speed();
        if !(speed.is_finite() && speed >= 0.0) {
            return Err(TrajectoryError::Speed(speed));
        }
        let positive = |name, value: f64| if value > 0.0 && value.is_finite() { Ok(()) } else { Err(TrajectoryError::NonPositive { name, value }) };
        positive("ramp_accel", self.ramp_accel)?;
        match self.kind {
            TrajectoryKind::Line { .. } => Ok(()),
            TrajectoryKind::SPattern { amplitude, wavelength, .. } => {
                positive("wavelength", wavelength)?;
                if amplitude.is_finite() && amplitude >= 0.0 {
                    Ok(())
                } else {
                    Err(TrajectoryError::NonPositive { name: "amplitude", value: amplitude })
                }
            }
            TrajectoryKind::Circle { radius, .. } => positive("radius", radius),
        }
    }
}

/// Distance traveled and speed along the path at time t under the ramp.
pub fn ramp_profile(speed: f64, accel: f64, t: f64) -> (f64, f64) {
    let t = t.max(0.0);
    let t_ramp = speed / accel;
    if t < t_ramp {
        (0.5 * accel * t * t, accel * t)
    } else {
        (speed * t - speed * speed / (2.0 * accel), speed)
    }
}

const ARC_TABLE_LEN: usize = 512;

/// Precomputed trajectory with an arc-length table for the S-pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub spec: TrajectorySpec,
    /// Cumulative arc length over one wavelength, at uniform forward steps.
    arc_table: Vec<f64>,
}

fn gauss_legendre_5(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    const X: [f64; 5] = [0.0, -0.538_469_310_105_683_1, 0.538_469_310_105_683_1, -0.906_179_845_938_664, 0.906_179_845_938_664];
    const W: [f64; 5] = [0.568_888_888_888_888_9, 0.478_628_670_499_366_5, 0.478_628_670_499_366_5, 0.236_926_885_056_189_1, 0.236_926_885_056_189_1];
    let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
    h * X.iter().zip(W).map(|(x, w)| w * f(m + h * x)).sum::<f64>()
}

impl Trajectory {
    pub fn new(spec: TrajectorySpec) -> Result<Self, TrajectoryError> {
        spec.validate()?;
        let mut arc_table = Vec::new();
        if let TrajectoryKind::SPattern { wavelength, .. } = spec.kind {
            let du = wavelength / ARC_TABLE_LEN as f64;
            arc_table.push(0.0);
            for i in 0..ARC_TABLE_LEN {
                let a = i as f64 * du;
                let prev = *arc_table.last().unwrap();
                arc_table.push(prev + gauss_legendre_5(|u| Self::s_speed_factor(&spec.kind, u), a, a + du));
            }
        }
        Ok(Self { spec, arc_table })
    }

    /// |d(path)/d(forward)| for the S-pattern.
    fn s_speed_factor(kind: &TrajectoryKind, u: f64) -> f64 {
        match *kind {
            TrajectoryKind::SPattern { amplitude, wavelength, .. } => {
                let k = 2.0 * std::f64::consts::PI / wavelength;
                (1.0 + (amplitude * k * (k * u).cos()).powi(2)).sqrt()
            }
            _ => 1.0,
        }
    }

    /// Forward coordinate at which the S-pattern has covered arc length `s`.
    fn s_forward_at(&self, s: f64) -> f64 {
        let TrajectoryKind::SPattern { wavelength, .. } = self.spec.kind else { return s };
        let period = *self.arc_table.last().unwrap();
        let cycles = (s / period).floor();
        let rem = s - cycles * period;
        let i = self.arc_table.partition_point(|&a| a <= rem).clamp(1, ARC_TABLE_LEN) - 1;
        let du = wavelength / ARC_TABLE_LEN as f64;
        let u0 = i as f64 * du;
        // Newton on the residual arc inside one table cell
        let mut u = u0 + (rem - self.arc_table[i]) / Self::s_speed_factor(&self.spec.kind, u0);
        for _ in 0..4 {
            let arc = self.arc_table[i] + gauss_legendre_5(|x| Self::s_speed_factor(&self.spec.kind, x), u0, u);
            u -= (arc - rem) / Self::s_speed_factor(&self.spec.kind, u);
        }
        cycles * wavelength + u
    }

    /// Platform state at time t (clamped to t ≥ 0).
    pub fn state_at(&self, t: f64) -> PlatformState {
        let spec = &self.spec;
        let (s, v) = ramp_profile(spec.kind.speed(), spec.ramp_accel, t);
        // local frame: x forward along the start heading, y to the right
        let (local, local_heading) = match spec.kind {
            TrajectoryKind::Line { .. } => (Vector2::new(s, 0.0), 0.0),
            TrajectoryKind::Circle { radius, .. } => {
                let th = s / radius;
                (Vector2::new(radius * th.sin(), radius * (1.0 - th.cos())), th)
            }
            TrajectoryKind::SPattern { amplitude, wavelength, .. } => {
                let u = self.s_forward_at(s);
                let k = 2.0 * std::f64::consts::PI / wavelength;
                (Vector2::new(u, amplitude * (k * u).sin()), (amplitude * k * (k * u).cos()).atan())
            }
        };
        let (c, sn) = (spec.start_heading.cos(), spec.start_heading.sin());
        let rot = |p: Vector2<f64>| Vector2::new(c * p.x - sn * p.y, sn * p.x + c * p.y);
        let heading = spec.start_heading + local_heading;
        let position = Vector2::new(spec.start[0], spec.start[1]) + rot(local);
        PlatformState { position, velocity: v * Vector2::new(heading.cos(), heading.sin()), heading }
    }
}
