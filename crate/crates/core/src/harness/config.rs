//! Scenario configuration, read from JSON. Every field has a default, so a
//! scenario file only lists what it changes.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::detection::DetectorConfig;
use crate::estimation::{EstimatorConfig, FilterConfig};
use crate::geometry::{CameraIntrinsics, CueModel};
use crate::guidance::GuidanceConfig;
use crate::imaging::ObservationNoise;
use crate::simworld::{PlantParams, Trajectory, TrajectorySpec, WorldLayout};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parsing {path}: {source}")]
    Parse { path: String, source: serde_json::Error },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Fidelity {
    /// Projected corners plus pixel noise; no rendering or detection.
    #[default]
    Geometric,
    /// Full render, corner detection and refinement every tick.
    Raster,
}

/// Vehicle pose at the first tick, relative to the platform at t = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InitialCondition {
    /// Distance behind the pad center along the direction of travel, meters.
    pub behind: f64,
    /// Offset to the right of the pad center line, meters.
    pub side: f64,
    /// Altitude above the pad surface, meters.
    pub altitude: f64,
    /// Heading relative to the platform, degrees, positive nose right.
    pub yaw_deg: f64,
}

impl Default for InitialCondition {
    fn default() -> Self {
        Self { behind: 3.0, side: 1.5, altitude: 0.3, yaw_deg: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CueSpec {
    pub rows: usize,
    pub cols: usize,
    pub square_size: f64,
}

impl Default for CueSpec {
    fn default() -> Self {
        Self { rows: 3, cols: 3, square_size: 0.120 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub trajectory: TrajectorySpec,
    /// Per-axis landing threshold W, meters.
    pub landing_threshold: f64,
    pub initial: InitialCondition,
    pub noise: ObservationNoise,
    pub fidelity: Fidelity,
    pub filter: FilterConfig,
    pub guidance: GuidanceConfig,
    pub estimator: EstimatorConfig,
    pub detector: DetectorConfig,
    pub plant: PlantParams,
    pub layout: WorldLayout,
    pub camera: CameraIntrinsics,
    pub cue: CueSpec,
    pub seed: u64,
    /// Simulated time limit, seconds.
    pub max_time: f64,
    /// Vision and control period, seconds.
    pub outer_dt: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            name: "default".into(),
            trajectory: TrajectorySpec::default(),
            landing_threshold: 0.05,
            initial: InitialCondition::default(),
            noise: ObservationNoise::default(),
            fidelity: Fidelity::Geometric,
            filter: FilterConfig::default(),
            guidance: GuidanceConfig::default(),
            estimator: EstimatorConfig::default(),
            detector: DetectorConfig::default(),
            plant: PlantParams::default(),
            layout: WorldLayout::default(),
            camera: CameraIntrinsics::hd720(),
            cue: CueSpec::default(),
            seed: 0,
            max_time: 120.0,
            outer_dt: 0.1,
        }
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        let cfg = Self::from_json(&text).map_err(|source| ConfigError::Parse { path: path.display().to_string(), source })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if !(self.landing_threshold > 0.0 && self.landing_threshold.is_finite()) {
            return invalid("landing_threshold must be positive");
        }
        if !(self.max_time > 0.0 && self.max_time.is_finite()) {
            return invalid("max_time must be positive");
        }
        if !(self.outer_dt > 0.0 && self.outer_dt >= self.plant.dt_inner) {
            return invalid("outer_dt must be positive and at least the plant step");
        }
        if !(self.initial.altitude > 0.0) {
            return invalid("initial altitude must be above the pad");
        }
        if self.filter.window == 0 || !(self.filter.yaw_bound > 0.0 && self.filter.x_bound > 0.0 && self.filter.y_bound > 0.0) {
            return invalid("filter window and bounds must be positive");
        }
        if !(self.noise.sigma_px >= 0.0 && self.noise.blur_radius >= 0.0 && self.noise.intensity_sigma >= 0.0) {
            return invalid("noise levels must be non-negative");
        }
        if !(self.guidance.setpoints.z_fwd > 0.0) {
            return invalid("forward setpoint must be positive");
        }
        self.trajectory.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.guidance.schedule.validate().map_err(|e| ConfigError::Invalid(e.into()))?;
        self.plant.validate().map_err(ConfigError::Invalid)?;
        self.layout.validate().map_err(ConfigError::Invalid)?;
        self.camera.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.cue_model()?;
        Ok(())
    }

    pub fn cue_model(&self) -> Result<CueModel, ConfigError> {
        CueModel::new(self.cue.rows, self.cue.cols, self.cue.square_size).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn trajectory(&self) -> Result<Trajectory, ConfigError> {
        Trajectory::new(self.trajectory).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// Guidance settings with the scenario's landing threshold applied.
    pub fn effective_guidance(&self) -> GuidanceConfig {
        GuidanceConfig { landing_threshold: self.landing_threshold, ..self.guidance.clone() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(serde_json::to_vec(self).expect("config serializes")))
    }
}
