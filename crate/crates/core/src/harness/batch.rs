//! Monte-Carlo batches over platform speed and landing threshold.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ConfigError, ScenarioConfig};
use super::episode::{run_episode, LandingResult};

/// SplitMix64 output for counter `k` under key `base`. Episode `k` of a batch
/// gets `split_seed(batch_seed, k)` whatever order the workers run in.
pub fn split_seed(base: u64, k: u64) -> u64 {
    let mut z = base.wrapping_add(k.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One episode of a batch, tagged with its position in the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    pub speed: f64,
    pub threshold: f64,
    pub index: u64,
    pub seed: u64,
    pub result: LandingResult,
}

/// Statistics for one (speed, threshold) cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub speed: f64,
    pub threshold: f64,
    pub episodes: usize,
    pub landed: usize,
    pub within_threshold: usize,
    pub success_rate: f64,
    /// Mean time to the landing decision over episodes that reached it, s.
    pub mean_time: Option<f64>,
    pub max_time: Option<f64>,
    pub max_abs_forward_dev: f64,
    pub max_abs_side_dev: f64,
    pub max_abs_final_yaw_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub scenario: String,
    pub config_hash: String,
    pub seed: u64,
    pub episodes_per_cell: usize,
    pub cells: Vec<CellSummary>,
}

impl BatchSummary {
    pub fn cell(&self, speed: f64, threshold: f64) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.speed == speed && c.threshold == threshold)
    }

    /// Mean time to threshold laid out as rows of speed and columns of threshold.
    pub fn table(&self) -> String {
        let mut speeds: Vec<f64> = self.cells.iter().map(|c| c.speed).collect();
        let mut thresholds: Vec<f64> = self.cells.iter().map(|c| c.threshold).collect();
        for v in [&mut speeds, &mut thresholds] {
            v.sort_by(f64::total_cmp);
            v.dedup();
        }
        let mut out = String::from("speed m/s");
        for w in &thresholds {
            out += &format!(" | W={:>4.0} cm       ", w * 100.0);
        }
        out.push('\n');
        for &v in &speeds {
            out += &format!("{v:>9.1}");
            for &w in &thresholds {
                match self.cell(v, w) {
                    Some(c) => {
                        let t = c.mean_time.map_or("    -".to_string(), |t| format!("{t:5.1}"));
                        out += &format!(" | {t} s {:>5.1} %", 100.0 * c.success_rate);
                    }
                    None => out += " |                 ",
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Aggregates outcomes into per-cell statistics. The input order does not
/// matter: outcomes are sorted by grid position and index first, so every sum
/// runs in the same order.
pub fn summarize(cfg: &ScenarioConfig, episodes_per_cell: usize, outcomes: &[EpisodeOutcome]) -> BatchSummary {
    let mut sorted = outcomes.to_vec();
    sorted.sort_by(|a, b| a.speed.total_cmp(&b.speed).then(a.threshold.total_cmp(&b.threshold)).then(a.index.cmp(&b.index)));
    let cells = sorted
        .chunk_by(|a, b| a.speed == b.speed && a.threshold == b.threshold)
        .map(|group| {
            let results: Vec<&LandingResult> = group.iter().map(|o| &o.result).collect();
            let times: Vec<f64> = results.iter().filter_map(|r| r.time_to_threshold).collect();
            let landed: Vec<&&LandingResult> = results.iter().filter(|r| r.landed).collect();
            let within = results.iter().filter(|r| r.within_threshold).count();
            let max_abs = |f: fn(&LandingResult) -> f64| landed.iter().map(|r| f(r).abs()).fold(0.0, f64::max);
            CellSummary {
                speed: group[0].speed,
                threshold: group[0].threshold,
                episodes: group.len(),
                landed: landed.len(),
                within_threshold: within,
                success_rate: within as f64 / group.len() as f64,
                mean_time: (!times.is_empty()).then(|| times.iter().sum::<f64>() / times.len() as f64),
                max_time: times.iter().copied().reduce(f64::max),
                max_abs_forward_dev: max_abs(|r| r.forward_dev),
                max_abs_side_dev: max_abs(|r| r.side_dev),
                max_abs_final_yaw_deg: max_abs(|r| r.final_yaw_deg),
            }
        })
        .collect();
    BatchSummary { scenario: cfg.name.clone(), config_hash: cfg.hash(), seed: cfg.seed, episodes_per_cell, cells }
}

/// Runs `n` episodes for every speed and threshold. The scenario's path shape
/// is kept and only its cruise speed changes. Episode `k` uses the same
/// derived seed in every cell.
pub fn run_batch_grid(cfg: &ScenarioConfig, n: usize, speeds: &[f64], thresholds: &[f64]) -> Result<(BatchSummary, Vec<EpisodeOutcome>), ConfigError> {
    if n == 0 {
        return Err(ConfigError::Invalid("batch needs at least one episode".into()));
    }
    let mut jobs = Vec::new();
    for &speed in speeds {
        for &threshold in thresholds {
            let mut c = cfg.clone();
            c.trajectory.kind = c.trajectory.kind.with_speed(speed);
            c.landing_threshold = threshold;
            c.validate()?;
            for k in 0..n as u64 {
                jobs.push((speed, threshold, k, c.clone()));
            }
        }
    }
    let outcomes = jobs
        .into_par_iter()
        .map(|(speed, threshold, index, mut c)| {
            c.seed = split_seed(cfg.seed, index);
            let (_, result) = run_episode(&c)?;
            Ok(EpisodeOutcome { speed, threshold, index, seed: c.seed, result })
        })
        .collect::<Result<Vec<_>, ConfigError>>()?;
    Ok((summarize(cfg, n, &outcomes), outcomes))
}

/// Batch over the scenario as configured.
pub fn run_batch(cfg: &ScenarioConfig, n: usize) -> Result<(BatchSummary, Vec<EpisodeOutcome>), ConfigError> {
    run_batch_grid(cfg, n, &[cfg.trajectory.kind.speed()], &[cfg.landing_threshold])
}
