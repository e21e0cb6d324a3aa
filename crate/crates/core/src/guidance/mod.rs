//! Outer-loop guidance: PID law, gain scheduling and the flight-mode machine
//! that turns the filtered relative state into percentage commands.

pub mod pid;
pub mod schedule;
pub mod tuning;

use serde::{Deserialize, Serialize};

pub use pid::{pid_step, PidGains, PidState, INTEGRAL_CLAMP, OUTPUT_LIMIT};
pub use schedule::{select_gain_levels, GainLevels, GainSchedule};

use crate::estimation::RelativeState;

/// Percent commands, each clamped to [−100, 100]. Positive pitch flies toward
/// the cue, positive roll moves right, positive yaw turns the nose right and
/// positive throttle climbs.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlCommand {
    pub pitch: f64,
    pub roll: f64,
    pub yaw: f64,
    pub throttle: f64,
}

impl ControlCommand {
    pub fn new(pitch: f64, roll: f64, yaw: f64, throttle: f64) -> Self {
        Self { pitch, roll, yaw, throttle }.clamped()
    }

    pub fn clamped(self) -> Self {
        let c = |v: f64| if v.is_nan() { 0.0 } else { v.clamp(-OUTPUT_LIMIT, OUTPUT_LIMIT) };
        Self { pitch: c(self.pitch), roll: c(self.roll), yaw: c(self.yaw), throttle: c(self.throttle) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SafetyKind {
    CenterlineGuard,
    DirectionalApproach,
    ImmediateLanding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FlightMode {
    Scanning,
    Tracking(GainLevels),
    Safety(SafetyKind),
}

impl FlightMode {
    pub fn name(&self) -> &'static str {
        match self {
            FlightMode::Scanning => "scanning",
            FlightMode::Tracking(_) => "tracking",
            FlightMode::Safety(SafetyKind::CenterlineGuard) => "centerline_guard",
            FlightMode::Safety(SafetyKind::DirectionalApproach) => "directional_approach",
            FlightMode::Safety(SafetyKind::ImmediateLanding) => "immediate_landing",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "scanning" => FlightMode::Scanning,
            "tracking" => FlightMode::Tracking(GainLevels { pitch: 0, roll: 0, yaw: 0 }),
            "centerline_guard" => FlightMode::Safety(SafetyKind::CenterlineGuard),
            "directional_approach" => FlightMode::Safety(SafetyKind::DirectionalApproach),
            "immediate_landing" => FlightMode::Safety(SafetyKind::ImmediateLanding),
            _ => return None,
        })
    }
}

/// Regulation targets. The vertical target is the camera height relative to
/// the cue center; zero holds the camera level with it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Setpoints {
    pub x_side: f64,
    pub y_vert: f64,
    pub z_fwd: f64,
    pub yaw: f64,
}

impl Default for Setpoints {
    fn default() -> Self {
        Self { x_side: 0.0, y_vert: 0.0, z_fwd: 0.5, yaw: 0.0 }
    }
}

/// Mode-machine constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GuidanceConfig {
    pub schedule: GainSchedule,
    pub setpoints: Setpoints,
    /// Per-axis horizontal landing threshold W, meters.
    pub landing_threshold: f64,
    /// Allowed vertical deviation from the setpoint for landing, meters.
    pub vertical_gate: f64,
    /// Pitch and roll scale while the heading error is large.
    pub yaw_priority_scale: f64,
    pub scan_yaw: f64,
    pub directional_roll: f64,
    /// Cue centroid offset from the image center, as a fraction of the width,
    /// beyond which the directional approach rolls.
    pub directional_band: f64,
    pub guard_pitch: f64,
    pub landing_throttle: f64,
}

impl Default for GuidanceConfig {
    fn default() -> Self {
        Self {
            schedule: GainSchedule::default(),
            setpoints: Setpoints::default(),
            landing_threshold: 0.05,
            vertical_gate: 0.05,
            yaw_priority_scale: 0.3,
            scan_yaw: 20.0,
            directional_roll: 10.0,
            directional_band: 0.15,
            guard_pitch: -10.0,
            landing_throttle: -100.0,
        }
    }
}

/// Per-axis deviation test against the landing box; heading is not gated.
pub fn landing_check(rs: &RelativeState, sp: &Setpoints, threshold: f64, vertical_gate: f64) -> bool {
    (rs.x_side - sp.x_side).abs() <= threshold
        && (rs.z_fwd - sp.z_fwd).abs() <= threshold
        && (rs.y_vert - sp.y_vert).abs() <= vertical_gate
}

/// Mode precedence: immediate landing, centerline guard, directional
/// approach (filter warm-up), scanning (no detection), tracking.
pub fn select_mode(rs: &RelativeState, detection_ok: bool, filter_active: bool, cfg: &GuidanceConfig) -> FlightMode {
    let sp = &cfg.setpoints;
    if detection_ok {
        if landing_check(rs, sp, cfg.landing_threshold, cfg.vertical_gate) {
            return FlightMode::Safety(SafetyKind::ImmediateLanding);
        }
        if rs.z_fwd - sp.z_fwd < 0.0 {
            return FlightMode::Safety(SafetyKind::CenterlineGuard);
        }
        if !filter_active {
            return FlightMode::Safety(SafetyKind::DirectionalApproach);
        }
        FlightMode::Tracking(select_gain_levels(rs, sp, &cfg.schedule))
    } else {
        FlightMode::Scanning
    }
}

pub fn scanning_command(cfg: &GuidanceConfig) -> ControlCommand {
    ControlCommand::new(0.0, 0.0, cfg.scan_yaw, 0.0)
}

/// Roll toward the cue from its raw image position: ±`directional_roll` when
/// the centroid column is more than the band away from the image center.
pub fn directional_roll(centroid_u: f64, image_width: f64, cfg: &GuidanceConfig) -> f64 {
    let offset = (centroid_u - 0.5 * image_width) / image_width;
    if offset > cfg.directional_band {
        cfg.directional_roll
    } else if offset < -cfg.directional_band {
        -cfg.directional_roll
    } else {
        0.0
    }
}

/// What the controller needs from the sensing side on each tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeInputs {
    pub detection_ok: bool,
    pub filter_active: bool,
    /// Column of the detected corner centroid, pixels.
    pub centroid_u: Option<f64>,
    pub image_width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub command: ControlCommand,
    pub mode: FlightMode,
    pub levels: GainLevels,
}

/// Four PID channels plus the gain levels they last ran with.
#[derive(Debug, Clone, PartialEq)]
pub struct Controller {
    pub cfg: GuidanceConfig,
    pub pitch: PidState,
    pub roll: PidState,
    pub yaw: PidState,
    pub throttle: PidState,
    levels: GainLevels,
}

impl Controller {
    pub fn new(cfg: GuidanceConfig) -> Self {
        Self {
            cfg,
            pitch: PidState::default(),
            roll: PidState::default(),
            yaw: PidState::default(),
            throttle: PidState::default(),
            levels: GainLevels { pitch: 1, roll: 1, yaw: 1 },
        }
    }

    pub fn levels(&self) -> GainLevels {
        self.levels
    }

    /// Switches gain levels, carrying each integral term across unchanged.
    fn set_levels(&mut self, next: GainLevels) {
        let s = &self.cfg.schedule;
        if next.pitch != self.levels.pitch {
            self.pitch.transfer(s.pitch_gains(self.levels.pitch), s.pitch_gains(next.pitch));
        }
        if next.roll != self.levels.roll {
            self.roll.transfer(s.roll_gains(self.levels.roll), s.roll_gains(next.roll));
        }
        if next.yaw != self.levels.yaw {
            self.yaw.transfer(s.yaw_gains(self.levels.yaw), s.yaw_gains(next.yaw));
        }
        self.levels = next;
    }

    fn pitch_pid(&mut self, rs: &RelativeState, dt: f64) -> f64 {
        let g = *self.cfg.schedule.pitch_gains(self.levels.pitch);
        // measure −z so a positive error (cue still far) pitches forward
        pid_step(&mut self.pitch, &g, -self.cfg.setpoints.z_fwd, -rs.z_fwd, dt)
    }

    fn roll_pid(&mut self, rs: &RelativeState, dt: f64) -> f64 {
        let g = *self.cfg.schedule.roll_gains(self.levels.roll);
        pid_step(&mut self.roll, &g, self.cfg.setpoints.x_side, rs.x_side, dt)
    }

    fn yaw_pid(&mut self, rs: &RelativeState, dt: f64) -> f64 {
        let g = *self.cfg.schedule.yaw_gains(self.levels.yaw);
        pid_step(&mut self.yaw, &g, self.cfg.setpoints.yaw.to_degrees(), rs.yaw.to_degrees(), dt)
    }

    fn throttle_pid(&mut self, rs: &RelativeState, dt: f64) -> f64 {
        let g = self.cfg.schedule.throttle;
        pid_step(&mut self.throttle, &g, self.cfg.setpoints.y_vert, rs.y_vert, dt)
    }

    /// Full tracking composition: four scheduled PIDs, with pitch and roll
    /// attenuated while the heading error is large.
    fn tracking(&mut self, rs: &RelativeState, dt: f64) -> ControlCommand {
        let mut pitch = self.pitch_pid(rs, dt);
        let mut roll = self.roll_pid(rs, dt);
        let yaw = self.yaw_pid(rs, dt);
        let throttle = self.throttle_pid(rs, dt);
        if self.levels.yaw == 1 {
            pitch *= self.cfg.yaw_priority_scale;
            roll *= self.cfg.yaw_priority_scale;
        }
        ControlCommand::new(pitch, roll, yaw, throttle)
    }

    pub fn step(&mut self, rs: &RelativeState, inputs: &ModeInputs, dt: f64) -> ControlOutput {
        let mode = select_mode(rs, inputs.detection_ok, inputs.filter_active, &self.cfg);
        if inputs.detection_ok {
            let next = select_gain_levels(rs, &self.cfg.setpoints, &self.cfg.schedule);
            self.set_levels(next);
        }
        let command = match mode {
            FlightMode::Scanning => {
                // measurements are stale; restart derivatives on reacquisition
                for s in [&mut self.pitch, &mut self.roll, &mut self.yaw, &mut self.throttle] {
                    s.break_derivative();
                }
                scanning_command(&self.cfg)
            }
            FlightMode::Tracking(_) => self.tracking(rs, dt),
            FlightMode::Safety(SafetyKind::ImmediateLanding) => {
                let c = self.tracking(rs, dt);
                ControlCommand::new(c.pitch, c.roll, c.yaw, self.cfg.landing_throttle)
            }
            FlightMode::Safety(SafetyKind::CenterlineGuard) => {
                // pitch PID bypassed: integral frozen, derivative restarted
                self.pitch.break_derivative();
                let roll = self.roll_pid(rs, dt);
                let yaw = self.yaw_pid(rs, dt);
                let throttle = self.throttle_pid(rs, dt);
                ControlCommand::new(self.cfg.guard_pitch, roll, yaw, throttle)
            }
            FlightMode::Safety(SafetyKind::DirectionalApproach) => {
                let pitch = self.pitch_pid(rs, dt);
                let throttle = self.throttle_pid(rs, dt);
                self.roll.break_derivative();
                self.yaw.break_derivative();
                let roll = inputs.centroid_u.map_or(0.0, |u| directional_roll(u, inputs.image_width, &self.cfg));
                ControlCommand::new(pitch, roll, 0.0, throttle)
            }
        };
        ControlOutput { command, mode, levels: self.levels }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn at(x: f64, y: f64, z: f64, yaw_deg: f64) -> RelativeState {
        RelativeState { x_side: x, y_vert: y, z_fwd: z, yaw: yaw_deg.to_radians(), t: 0.0, fresh: true }
    }

    fn inputs(detection_ok: bool, filter_active: bool) -> ModeInputs {
        ModeInputs { detection_ok, filter_active, centroid_u: Some(640.0), image_width: 1280.0 }
    }

    #[test]
    fn landing_check_examples() {
        let sp = Setpoints::default();
        assert!(landing_check(&at(0.11, 0.0, 0.52, 0.0), &sp, 0.15, 0.05));
        assert!(!landing_check(&at(0.11, 0.0, 0.52, 0.0), &sp, 0.05, 0.05));
        assert!(landing_check(&at(0.02, 0.01, 0.49, 1.7), &sp, 0.05, 0.05));
        assert!(!landing_check(&at(0.0, 0.2, 0.5, 0.0), &sp, 0.05, 0.05));
    }

    #[test]
    fn mode_examples() {
        let cfg = GuidanceConfig::default();
        assert_eq!(select_mode(&at(0.0, 0.0, 3.0, 0.0), false, true, &cfg), FlightMode::Scanning);
        assert_eq!(select_mode(&at(0.01, 0.0, 0.51, 0.0), true, true, &cfg), FlightMode::Safety(SafetyKind::ImmediateLanding));
        assert_eq!(select_mode(&at(0.5, 0.0, 3.0, 0.0), true, false, &cfg), FlightMode::Safety(SafetyKind::DirectionalApproach));
        assert_eq!(select_mode(&at(0.5, 0.3, 0.45, 0.0), true, true, &cfg), FlightMode::Safety(SafetyKind::CenterlineGuard));
        assert!(matches!(select_mode(&at(0.5, 0.3, 0.55, 0.0), true, true, &cfg), FlightMode::Tracking(_)));
        // the landing box outranks warm-up
        assert_eq!(select_mode(&at(0.0, 0.0, 0.5, 0.0), true, false, &cfg), FlightMode::Safety(SafetyKind::ImmediateLanding));
    }

    #[test]
    fn scanning_command_is_constant_yaw() {
        let cfg = GuidanceConfig::default();
        assert_eq!(scanning_command(&cfg), ControlCommand::new(0.0, 0.0, 20.0, 0.0));
        let mut c = Controller::new(cfg);
        let out = c.step(&at(1.0, 0.5, 4.0, 3.0).stale(0.1), &inputs(false, true), 0.1);
        assert_eq!(out.mode, FlightMode::Scanning);
        assert_eq!((out.command.pitch, out.command.roll), (0.0, 0.0));
        let out = c.step(&at(1.0, 0.5, 4.0, 3.0), &inputs(true, true), 0.1);
        assert!(matches!(out.mode, FlightMode::Tracking(_)));
    }

    #[test]
    fn directional_roll_examples() {
        let cfg = GuidanceConfig::default();
        assert_eq!(directional_roll(0.70 * 1280.0, 1280.0, &cfg), 10.0);
        assert_eq!(directional_roll(0.55 * 1280.0, 1280.0, &cfg), 0.0);
        assert_eq!(directional_roll(0.25 * 1280.0, 1280.0, &cfg), -10.0);
        let mut c = Controller::new(cfg);
        let mut inp = inputs(true, false);
        inp.centroid_u = Some(0.8 * 1280.0);
        let out = c.step(&at(-1.0, 0.0, 5.0, 8.0), &inp, 0.1);
        assert_eq!(out.mode, FlightMode::Safety(SafetyKind::DirectionalApproach));
        assert_eq!(out.command.roll, 10.0);
        assert_eq!(out.command.yaw, 0.0);
        assert!(out.command.pitch > 0.0);
    }

    #[test]
    fn centerline_guard_freezes_pitch_integral() {
        let mut c = Controller::new(GuidanceConfig::default());
        for _ in 0..5 {
            c.step(&at(0.3, 0.0, 1.0, 0.0), &inputs(true, true), 0.1);
        }
        let before = c.pitch.integral;
        let out = c.step(&at(0.3, 0.2, 0.45, 0.0), &inputs(true, true), 0.1);
        assert_eq!(out.mode, FlightMode::Safety(SafetyKind::CenterlineGuard));
        assert_eq!(out.command.pitch, -10.0);
        assert_eq!(c.pitch.integral, before);
        // guard inactive just behind the centerline
        let out = c.step(&at(0.3, 0.2, 0.55, 0.0), &inputs(true, true), 0.1);
        assert!(matches!(out.mode, FlightMode::Tracking(_)));
        assert!(out.command.pitch.abs() < 100.0);
    }

    #[test]
    fn yaw_priority_attenuates_translation() {
        let rs = at(1.0, 0.0, 4.0, 20.0);
        let mut scaled = Controller::new(GuidanceConfig::default());
        let out = scaled.step(&rs, &inputs(true, true), 0.1);
        assert_eq!(out.levels.yaw, 1);
        let mut cfg = GuidanceConfig::default();
        cfg.yaw_priority_scale = 1.0;
        let mut raw = Controller::new(cfg);
        let unscaled = raw.step(&rs, &inputs(true, true), 0.1);
        assert!(out.command.pitch.abs() <= 0.3 * unscaled.command.pitch.abs() + 1e-12);
        assert!(out.command.roll.abs() <= 0.3 * unscaled.command.roll.abs() + 1e-12);
    }

    #[test]
    fn landing_forces_full_throttle_down() {
        let mut c = Controller::new(GuidanceConfig::default());
        let out = c.step(&at(0.02, 0.01, 0.53, 5.0), &inputs(true, true), 0.1);
        assert_eq!(out.mode, FlightMode::Safety(SafetyKind::ImmediateLanding));
        assert_eq!(out.command.throttle, -100.0);
    }

    #[test]
    fn equilibrium_gives_zero_command() {
        let mut c = Controller::new(GuidanceConfig::default());
        let sp = Setpoints::default();
        // hover just outside the vertical gate so the landing box stays closed
        let mut cfg = GuidanceConfig::default();
        cfg.vertical_gate = -1.0;
        c.cfg = cfg;
        for _ in 0..3 {
            let out = c.step(&at(sp.x_side, sp.y_vert, sp.z_fwd, 0.0), &inputs(true, true), 0.1);
            assert_eq!(out.command, ControlCommand::default());
        }
    }

    proptest! {
        #[test]
        fn commands_always_clamped(
            states in proptest::collection::vec((-50.0f64..50.0, -20.0f64..20.0, -5.0f64..60.0, -3.1f64..3.1, any::<bool>(), any::<bool>(), 0.0f64..1280.0), 1..40)
        ) {
            let mut c = Controller::new(GuidanceConfig::default());
            for (x, y, z, yaw, ok, active, u) in states {
                let rs = RelativeState { x_side: x, y_vert: y, z_fwd: z, yaw, t: 0.0, fresh: ok };
                let inp = ModeInputs { detection_ok: ok, filter_active: active, centroid_u: Some(u), image_width: 1280.0 };
                let out = c.step(&rs, &inp, 0.1);
                for v in [out.command.pitch, out.command.roll, out.command.yaw, out.command.throttle] {
                    prop_assert!(v.abs() <= 100.0);
                }
                if !ok {
                    prop_assert_eq!(out.mode, FlightMode::Scanning);
                }
            }
        }

        #[test]
        fn levels_are_a_function_of_state(x in -5.0f64..5.0, z in 0.0f64..20.0, yaw in -1.0f64..1.0) {
            let cfg = GuidanceConfig::default();
            let rs = RelativeState { x_side: x, y_vert: 0.0, z_fwd: z, yaw, t: 0.0, fresh: true };
            prop_assert_eq!(select_gain_levels(&rs, &cfg.setpoints, &cfg.schedule), select_gain_levels(&rs, &cfg.setpoints, &cfg.schedule));
            prop_assert_eq!(select_mode(&rs, true, true, &cfg), select_mode(&rs, true, true, &cfg));
        }
    }
}
