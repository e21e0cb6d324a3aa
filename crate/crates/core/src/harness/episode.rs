//! Closed-loop episode: sense, estimate, filter, command, integrate, every
//! outer tick until touchdown or timeout.

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{ConfigError, Fidelity, ScenarioConfig};
use crate::detection::{detect_cue, CornerObservation, DetectionFailure};
use crate::estimation::{Estimator, MovingAverageFilter, RelativeState};
use crate::guidance::{ControlCommand, Controller, FlightMode, ModeInputs, SafetyKind};
use crate::imaging::{observe_corners_geometric, render_cue_image};
use crate::simworld::{integrate_hold, PlatformState, VehicleState};

/// Longest time the held landing command is integrated before giving up.
const MAX_DESCENT_TIME: f64 = 10.0;

/// One outer tick. Raw estimate fields are NaN on ticks without a fresh
/// estimate; vehicle and platform states are sampled at the start of the tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub t: f64,
    pub mode: ModeTag,
    pub pitch_level: u8,
    pub roll_level: u8,
    pub yaw_level: u8,
    pub detection_ok: bool,
    pub filter_active: bool,
    pub raw_x: f64,
    pub raw_y: f64,
    pub raw_z: f64,
    pub raw_yaw: f64,
    pub filt_x: f64,
    pub filt_y: f64,
    pub filt_z: f64,
    pub filt_yaw: f64,
    pub cmd_pitch: f64,
    pub cmd_roll: f64,
    pub cmd_yaw: f64,
    pub cmd_throttle: f64,
    pub true_x: f64,
    pub true_y: f64,
    pub true_z: f64,
    pub true_yaw: f64,
    pub veh_n: f64,
    pub veh_e: f64,
    pub veh_d: f64,
    pub veh_vn: f64,
    pub veh_ve: f64,
    pub veh_vd: f64,
    pub veh_roll: f64,
    pub veh_pitch: f64,
    pub veh_yaw: f64,
    pub plat_n: f64,
    pub plat_e: f64,
    pub plat_heading: f64,
}

/// Flight mode without its gain levels, which have their own columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeTag {
    Scanning,
    Tracking,
    CenterlineGuard,
    DirectionalApproach,
    ImmediateLanding,
}

impl From<FlightMode> for ModeTag {
    fn from(m: FlightMode) -> Self {
        match m {
            FlightMode::Scanning => ModeTag::Scanning,
            FlightMode::Tracking(_) => ModeTag::Tracking,
            FlightMode::Safety(SafetyKind::CenterlineGuard) => ModeTag::CenterlineGuard,
            FlightMode::Safety(SafetyKind::DirectionalApproach) => ModeTag::DirectionalApproach,
            FlightMode::Safety(SafetyKind::ImmediateLanding) => ModeTag::ImmediateLanding,
        }
    }
}

impl TickRecord {
    pub fn command(&self) -> ControlCommand {
        ControlCommand { pitch: self.cmd_pitch, roll: self.cmd_roll, yaw: self.cmd_yaw, throttle: self.cmd_throttle }
    }

    pub fn filtered(&self) -> RelativeState {
        RelativeState { x_side: self.filt_x, y_vert: self.filt_y, z_fwd: self.filt_z, yaw: self.filt_yaw, t: self.t, fresh: self.detection_ok }
    }

    pub fn truth(&self) -> RelativeState {
        RelativeState { x_side: self.true_x, y_vert: self.true_y, z_fwd: self.true_z, yaw: self.true_yaw, t: self.t, fresh: true }
    }

    /// Bitwise equality, treating NaN fields as equal to themselves.
    pub fn bit_eq(&self, other: &Self) -> bool {
        self.floats().iter().zip(other.floats()).all(|(a, b)| a.to_bits() == b.to_bits())
            && self.mode == other.mode
            && (self.pitch_level, self.roll_level, self.yaw_level, self.detection_ok, self.filter_active)
                == (other.pitch_level, other.roll_level, other.yaw_level, other.detection_ok, other.filter_active)
    }

    fn floats(&self) -> [f64; 29] {
        [
            self.t, self.raw_x, self.raw_y, self.raw_z, self.raw_yaw, self.filt_x, self.filt_y, self.filt_z, self.filt_yaw,
            self.cmd_pitch, self.cmd_roll, self.cmd_yaw, self.cmd_throttle, self.true_x, self.true_y, self.true_z, self.true_yaw,
            self.veh_n, self.veh_e, self.veh_d, self.veh_vn, self.veh_ve, self.veh_vd, self.veh_roll, self.veh_pitch, self.veh_yaw,
            self.plat_n, self.plat_e, self.plat_heading,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub ticks: Vec<TickRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandingResult {
    /// Touched down after the landing decision.
    pub landed: bool,
    /// Both touchdown deviations within the landing threshold.
    pub within_threshold: bool,
    /// Time the landing decision fired, seconds.
    pub time_to_threshold: Option<f64>,
    pub touchdown_time: Option<f64>,
    /// Pad-frame touchdown deviation (forward, sideward), meters.
    pub forward_dev: f64,
    pub side_dev: f64,
    /// Heading relative to the platform at touchdown, degrees.
    pub final_yaw_deg: f64,
}

fn initial_vehicle(cfg: &ScenarioConfig, platform: &PlatformState) -> VehicleState {
    let ic = &cfg.initial;
    let p = platform.position - ic.behind * platform.forward() + ic.side * platform.right();
    VehicleState { position: Vector3::new(p.x, p.y, -ic.altitude), yaw: platform.heading + ic.yaw_deg.to_radians(), ..Default::default() }
}

/// The episode RNG: the scenario seed picks the key, the noise seed the stream.
pub fn episode_rng(cfg: &ScenarioConfig) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(cfg.noise.seed);
    rng
}

pub fn run_episode(cfg: &ScenarioConfig) -> Result<(EpisodeLog, LandingResult), ConfigError> {
    cfg.validate()?;
    let cue = cfg.cue_model()?;
    let traj = cfg.trajectory()?;
    let k = cfg.camera;
    let mut rng = episode_rng(cfg);
    let mut estimator = Estimator::new(k, cue.clone(), cfg.estimator);
    let mut filter = MovingAverageFilter::new(&cfg.filter);
    let mut controller = Controller::new(cfg.effective_guidance());
    let layout = cfg.layout;

    let mut vehicle = initial_vehicle(cfg, &traj.state_at(0.0));
    let mut log = EpisodeLog::default();
    let mut filtered = RelativeState::default();
    let n_ticks = (cfg.max_time / cfg.outer_dt).floor() as usize;

    let finish = |vehicle: &VehicleState, t_land: Option<f64>, t_touch: Option<f64>| {
        let platform = traj.state_at(t_touch.unwrap_or(cfg.max_time));
        let (fwd, side) = layout.pad_deviation(vehicle, &platform);
        let w = cfg.landing_threshold;
        let landed = t_land.is_some() && t_touch.is_some();
        LandingResult {
            landed,
            within_threshold: landed && fwd.abs() <= w && side.abs() <= w,
            time_to_threshold: t_land,
            touchdown_time: t_touch,
            forward_dev: fwd,
            side_dev: side,
            final_yaw_deg: crate::simworld::wrap_angle(vehicle.yaw - platform.heading).to_degrees(),
        }
    };

    for tick in 0..n_ticks {
        let t = tick as f64 * cfg.outer_dt;
        let platform = traj.state_at(t);
        let pose = layout.camera_pose(&vehicle, &platform);
        let obs: Result<CornerObservation, DetectionFailure> = match cfg.fidelity {
            Fidelity::Geometric => observe_corners_geometric(&k, &pose, &cue, &cfg.noise, &cfg.detector.visibility, &mut rng),
            Fidelity::Raster => {
                let img = render_cue_image(&k, &pose, &cue, &cfg.noise, &mut rng);
                detect_cue(&img, cue.rows, cue.cols, &cfg.detector)
            }
        };
        let record = estimator.update(obs.as_ref().ok(), t);
        let detection_ok = record.state.fresh;
        if detection_ok {
            filtered = filter.update(&record.state);
        } else {
            // a gap invalidates the history; warm up again on reacquisition
            filter.reset();
            filtered = filtered.stale(t);
        }
        let inputs = ModeInputs {
            detection_ok,
            filter_active: filter.active(),
            centroid_u: obs.as_ref().ok().map(|o| o.centroid().u),
            image_width: k.width as f64,
        };
        let out = controller.step(&filtered, &inputs, cfg.outer_dt);
        let truth = layout.true_relative_state(&vehicle, &platform, t);
        let raw = if detection_ok { record.state } else { RelativeState { x_side: f64::NAN, y_vert: f64::NAN, z_fwd: f64::NAN, yaw: f64::NAN, t, fresh: false } };
        let c = out.command;
        log.ticks.push(TickRecord {
            t,
            mode: out.mode.into(),
            pitch_level: out.levels.pitch,
            roll_level: out.levels.roll,
            yaw_level: out.levels.yaw,
            detection_ok,
            filter_active: inputs.filter_active,
            raw_x: raw.x_side,
            raw_y: raw.y_vert,
            raw_z: raw.z_fwd,
            raw_yaw: raw.yaw,
            filt_x: filtered.x_side,
            filt_y: filtered.y_vert,
            filt_z: filtered.z_fwd,
            filt_yaw: filtered.yaw,
            cmd_pitch: c.pitch,
            cmd_roll: c.roll,
            cmd_yaw: c.yaw,
            cmd_throttle: c.throttle,
            true_x: truth.x_side,
            true_y: truth.y_vert,
            true_z: truth.z_fwd,
            true_yaw: truth.yaw,
            veh_n: vehicle.position.x,
            veh_e: vehicle.position.y,
            veh_d: vehicle.position.z,
            veh_vn: vehicle.velocity.x,
            veh_ve: vehicle.velocity.y,
            veh_vd: vehicle.velocity.z,
            veh_roll: vehicle.roll,
            veh_pitch: vehicle.pitch,
            veh_yaw: vehicle.yaw,
            plat_n: platform.position.x,
            plat_e: platform.position.y,
            plat_heading: platform.heading,
        });

        if out.mode == FlightMode::Safety(SafetyKind::ImmediateLanding) {
            // streaming stops: hold the last command until ground contact
            let (end, contact) = integrate_hold(&vehicle, &c, &cfg.plant, MAX_DESCENT_TIME, 0.0);
            return Ok((log, finish(&end, Some(t), contact.map(|dt| t + dt))));
        }

        let (next, contact) = integrate_hold(&vehicle, &c, &cfg.plant, cfg.outer_dt, 0.0);
        vehicle = next;
        if let Some(dt) = contact {
            // ground contact without a landing decision
            return Ok((log, finish(&vehicle, None, Some(t + dt))));
        }
    }
    Ok((log, finish(&vehicle, None, None)))
}
