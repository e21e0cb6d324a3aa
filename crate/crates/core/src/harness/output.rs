//! Output files: per-tick logs (CSV and JSON lines), batch summaries (JSON),
//! landing scatter (CSV) and validation tables (CSV).
//!
//! Log CSV header, one row per outer tick (SI units, angles in radians):
//! `t, mode, pitch_level, roll_level, yaw_level, detection_ok, filter_active,
//! raw_{x,y,z,yaw}, filt_{x,y,z,yaw}, cmd_{pitch,roll,yaw,throttle},
//! true_{x,y,z,yaw}, veh_{n,e,d,vn,ve,vd,roll,pitch,yaw}, plat_{n,e,heading}`.
//! Raw estimate fields are `NaN` on ticks without a detection; in JSON lines
//! they are `null`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use super::batch::{BatchSummary, EpisodeOutcome};
use super::config::ScenarioConfig;
use super::episode::{EpisodeLog, LandingResult, TickRecord};
use super::validation::RangeStats;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> OutputError + '_ {
    move |source| OutputError::Io { path: path.to_path_buf(), source }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> OutputError + '_ {
    move |source| OutputError::Csv { path: path.to_path_buf(), source }
}

fn json_err(path: &Path) -> impl FnOnce(serde_json::Error) -> OutputError + '_ {
    move |source| OutputError::Json { path: path.to_path_buf(), source }
}

pub fn create_dir(dir: &Path) -> Result<(), OutputError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<(), OutputError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for row in rows {
        w.serialize(row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), OutputError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(json_err(path))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(io_err(path))
}

pub fn write_log_csv(log: &EpisodeLog, path: &Path) -> Result<(), OutputError> {
    write_rows(path, &log.ticks)
}

pub fn read_log_csv(path: &Path) -> Result<EpisodeLog, OutputError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let ticks = r.deserialize::<TickRecord>().collect::<Result<Vec<_>, _>>().map_err(csv_err(path))?;
    Ok(EpisodeLog { ticks })
}

pub fn write_log_jsonl(log: &EpisodeLog, path: &Path) -> Result<(), OutputError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for tick in &log.ticks {
        serde_json::to_writer(&mut w, tick).map_err(json_err(path))?;
        w.write_all(b"\n").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Episode result with what is needed to reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeReport<'a> {
    pub scenario: &'a str,
    pub config_hash: String,
    pub seed: u64,
    pub result: &'a LandingResult,
}

pub fn write_episode_report(cfg: &ScenarioConfig, result: &LandingResult, path: &Path) -> Result<(), OutputError> {
    write_json(path, &EpisodeReport { scenario: &cfg.name, config_hash: cfg.hash(), seed: cfg.seed, result })
}

pub fn write_summary_json(summary: &BatchSummary, path: &Path) -> Result<(), OutputError> {
    write_json(path, summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
struct ScatterRow {
    forward_dev: f64,
    side_dev: f64,
    speed: f64,
    threshold: f64,
    seed: u64,
    landed: bool,
    within_threshold: bool,
}

/// Touchdown points, one row per landed episode.
pub fn write_scatter_csv(outcomes: &[EpisodeOutcome], path: &Path) -> Result<(), OutputError> {
    let rows = outcomes.iter().filter(|o| o.result.landed).map(|o| ScatterRow {
        forward_dev: o.result.forward_dev,
        side_dev: o.result.side_dev,
        speed: o.speed,
        threshold: o.threshold,
        seed: o.seed,
        landed: o.result.landed,
        within_threshold: o.result.within_threshold,
    });
    write_rows(path, rows)
}

pub fn write_validation_csv(stats: &[RangeStats], path: &Path) -> Result<(), OutputError> {
    write_rows(path, stats)
}

pub fn write_config(cfg: &ScenarioConfig, path: &Path) -> Result<(), OutputError> {
    std::fs::write(path, cfg.to_json() + "\n").map_err(io_err(path))
}
