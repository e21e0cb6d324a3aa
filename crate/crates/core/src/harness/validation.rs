//! Vision accuracy sweep against synthetic ground truth: random in-view poses
//! per range, each held for one filter window of independent frames.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::batch::split_seed;
use super::config::{ConfigError, Fidelity, ScenarioConfig};
use crate::detection::detect_cue;
use crate::estimation::{Estimator, MovingAverageFilter, RelativeState};
use crate::geometry::Pose;
use crate::imaging::{observe_corners_geometric, render_cue_image, ObservationNoise};
use crate::simworld::wrap_angle;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationSpec {
    /// Forward distances from the cue, meters.
    pub ranges: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    /// Largest sideward offset as a fraction of range.
    pub lateral_fraction: f64,
    pub vertical_fraction: f64,
    pub max_heading_deg: f64,
}

impl ValidationSpec {
    pub fn new(ranges: Vec<f64>, trials: usize) -> Self {
        Self { ranges, trials, seed: 0, lateral_fraction: 0.2, vertical_fraction: 0.1, max_heading_deg: 15.0 }
    }

    /// Parses `start:stop:step`, inclusive of `stop`.
    pub fn parse_ranges(text: &str) -> Result<Vec<f64>, String> {
        let parts: Vec<f64> = text.split(':').map(|s| s.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|e| format!("range {text:?}: {e}"))?;
        let [start, stop, step] = parts[..] else {
            return Err(format!("range {text:?}: expected start:stop:step"));
        };
        if !(start > 0.0 && stop >= start && step > 0.0) {
            return Err(format!("range {text:?}: need 0 < start <= stop and step > 0"));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        Ok((0..=n).map(|i| start + i as f64 * step).collect())
    }
}

/// Error statistics for one range. Position errors in meters, yaw in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeStats {
    pub range: f64,
    pub trials: usize,
    /// Trials whose every frame was detected and estimated.
    pub valid: usize,
    pub max_side: f64,
    pub median_side: f64,
    pub max_vert: f64,
    pub median_vert: f64,
    pub max_fwd: f64,
    pub median_fwd: f64,
    pub max_yaw_deg: f64,
    pub median_yaw_deg: f64,
    /// Same channels after the moving-average filter.
    pub max_side_filtered: f64,
    pub max_vert_filtered: f64,
    pub max_yaw_filtered_deg: f64,
    pub median_yaw_filtered_deg: f64,
}

struct TrialErrors {
    raw: Vec<[f64; 4]>,
    filtered: [f64; 4],
}

fn errors(est: &RelativeState, truth: &RelativeState) -> [f64; 4] {
    [
        (est.x_side - truth.x_side).abs(),
        (est.y_vert - truth.y_vert).abs(),
        (est.z_fwd - truth.z_fwd).abs(),
        wrap_angle(est.yaw - truth.yaw).abs().to_degrees(),
    ]
}

fn random_pose(range: f64, spec: &ValidationSpec, rng: &mut ChaCha8Rng) -> (Pose, RelativeState) {
    let x = rng.random_range(-1.0..=1.0) * spec.lateral_fraction * range;
    let y = rng.random_range(-1.0..=1.0) * spec.vertical_fraction * range;
    let yaw = rng.random_range(-1.0..=1.0) * spec.max_heading_deg.to_radians();
    let truth = RelativeState { x_side: x, y_vert: y, z_fwd: range, yaw, t: 0.0, fresh: true };
    (Pose::from_camera_state(truth.position_in_cue(), yaw), truth)
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn max(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NAN, f64::max)
}

/// One trial: draw an in-view pose, observe it for a full filter window and
/// return raw per-frame and final filtered errors. `None` when some frame
/// fails to detect or estimate.
fn run_trial(cfg: &ScenarioConfig, noise: &ObservationNoise, range: f64, spec: &ValidationSpec, seed: u64) -> Option<TrialErrors> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cue = cfg.cue_model().ok()?;
    let k = cfg.camera;
    // resample until all corners are in view; the first draw almost always is
    let in_view = |p: &Pose| {
        // noiseless observation draws nothing from the generator
        let mut unused = ChaCha8Rng::seed_from_u64(0);
        observe_corners_geometric(&k, p, &cue, &ObservationNoise::noiseless(), &cfg.detector.visibility, &mut unused).is_ok()
    };
    let (pose, truth) = (0..100).map(|_| random_pose(range, spec, &mut rng)).find(|(p, _)| in_view(p))?;
    let mut estimator = Estimator::new(k, cue.clone(), cfg.estimator);
    let mut filter = MovingAverageFilter::new(&cfg.filter);
    let mut raw = Vec::with_capacity(cfg.filter.window);
    let mut filtered = truth;
    for frame in 0..cfg.filter.window {
        let obs = match cfg.fidelity {
            Fidelity::Geometric => observe_corners_geometric(&k, &pose, &cue, noise, &cfg.detector.visibility, &mut rng).ok()?,
            Fidelity::Raster => {
                let img = render_cue_image(&k, &pose, &cue, noise, &mut rng);
                detect_cue(&img, cue.rows, cue.cols, &cfg.detector).ok()?
            }
        };
        let rec = estimator.update(Some(&obs), frame as f64 * cfg.outer_dt);
        if !rec.state.fresh {
            return None;
        }
        raw.push(errors(&rec.state, &truth));
        filtered = filter.update(&rec.state);
    }
    Some(TrialErrors { raw, filtered: errors(&filtered, &truth) })
}

/// Runs the sweep with the scenario's camera, cue, estimator, filter and
/// fidelity, and the given noise. Trials are seeded from `spec.seed`, so the
/// result does not depend on thread scheduling.
pub fn vision_validation_sweep(cfg: &ScenarioConfig, noise: &ObservationNoise, spec: &ValidationSpec) -> Result<Vec<RangeStats>, ConfigError> {
    cfg.validate()?;
    if spec.trials == 0 || spec.ranges.iter().any(|r| !(*r > 0.0)) {
        return Err(ConfigError::Invalid("validation needs trials >= 1 and positive ranges".into()));
    }
    Ok(spec
        .ranges
        .iter()
        .enumerate()
        .map(|(ri, &range)| {
            let trials: Vec<TrialErrors> = (0..spec.trials as u64)
                .into_par_iter()
                .filter_map(|i| run_trial(cfg, noise, range, spec, split_seed(spec.seed ^ split_seed(ri as u64, 0), i)))
                .collect();
            let channel = |c: usize| trials.iter().flat_map(|t| t.raw.iter().map(move |e| e[c])).collect::<Vec<f64>>();
            let filtered = |c: usize| trials.iter().map(|t| t.filtered[c]).collect::<Vec<f64>>();
            let (mut side, mut vert, mut fwd, mut yaw) = (channel(0), channel(1), channel(2), channel(3));
            let mut yaw_f = filtered(3);
            RangeStats {
                range,
                trials: spec.trials,
                valid: trials.len(),
                max_side: max(&side),
                median_side: median(&mut side),
                max_vert: max(&vert),
                median_vert: median(&mut vert),
                max_fwd: max(&fwd),
                median_fwd: median(&mut fwd),
                max_yaw_deg: max(&yaw),
                median_yaw_deg: median(&mut yaw),
                max_side_filtered: max(&filtered(0)),
                max_vert_filtered: max(&filtered(1)),
                max_yaw_filtered_deg: max(&yaw_f),
                median_yaw_filtered_deg: median(&mut yaw_f),
            }
        })
        .collect())
}
