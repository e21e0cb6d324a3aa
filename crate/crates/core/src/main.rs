use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cuelanding::detection::detect_cue;
use cuelanding::estimation::RelativeState;
use cuelanding::geometry::Pose;
use cuelanding::harness::output::{self, OutputError};
use cuelanding::harness::{run_batch_grid, run_episode, vision_validation_sweep, ConfigError, ScenarioConfig, ValidationSpec};
use cuelanding::imaging::render_cue_image;

#[derive(Parser)]
#[command(name = "cuelanding", version, about = "Vision-guided landing on moving platforms: closed-loop simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode and write its log and result.
    Run {
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte-Carlo batch over platform speeds and landing thresholds.
    Batch {
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, value_delimiter = ',', default_values_t = [0.5, 2.0, 4.0, 6.0, 8.5])]
        speeds: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [0.05, 0.15, 0.25])]
        thresholds: Vec<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Render and detect every frame instead of projecting corners.
        #[arg(long)]
        raster: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Vision accuracy against ground truth, per range.
    VisionValidate {
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// start:stop:step in meters.
        #[arg(long, default_value = "1:17:1")]
        ranges: String,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        /// Corner noise std-dev, pixels.
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        raster: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render the cue from one relative pose to a PGM image and run detection on it.
    RenderDebug {
        /// side,vertical,forward,yaw_deg relative to the cue center, e.g. `--pose=-0.3,0.1,3,10`.
        #[arg(long, allow_hyphen_values = true)]
        pose: String,
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

enum CliError {
    Config(ConfigError),
    Output(OutputError),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<OutputError> for CliError {
    fn from(e: OutputError) -> Self {
        CliError::Output(e)
    }
}

fn load(path: Option<&Path>) -> Result<ScenarioConfig, ConfigError> {
    match path {
        Some(p) => ScenarioConfig::load(p),
        None => Ok(ScenarioConfig::default()),
    }
}

fn run(scenario: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<(), CliError> {
    let mut cfg = load(scenario)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let (log, result) = run_episode(&cfg)?;
    output::create_dir(out)?;
    output::write_config(&cfg, &out.join("scenario.json"))?;
    output::write_log_csv(&log, &out.join("log.csv"))?;
    output::write_log_jsonl(&log, &out.join("log.jsonl"))?;
    output::write_episode_report(&cfg, &result, &out.join("result.json"))?;
    match result.time_to_threshold {
        Some(t) => println!(
            "landed={} within={} t={t:.1}s forward={:+.3}m side={:+.3}m yaw={:+.2}deg",
            result.landed, result.within_threshold, result.forward_dev, result.side_dev, result.final_yaw_deg
        ),
        None => println!("no landing within {:.0} s", cfg.max_time),
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn batch(scenario: Option<&Path>, n: usize, speeds: &[f64], thresholds: &[f64], seed: Option<u64>, raster: bool, out: &Path) -> Result<(), CliError> {
    let mut cfg = load(scenario)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if raster {
        cfg.fidelity = cuelanding::harness::Fidelity::Raster;
    }
    let (summary, outcomes) = run_batch_grid(&cfg, n, speeds, thresholds)?;
    output::create_dir(out)?;
    output::write_config(&cfg, &out.join("scenario.json"))?;
    output::write_summary_json(&summary, &out.join("summary.json"))?;
    output::write_scatter_csv(&outcomes, &out.join("scatter.csv"))?;
    print!("{}", summary.table());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn validate(scenario: Option<&Path>, ranges: &str, trials: usize, noise: Option<f64>, seed: u64, raster: bool, out: &Path) -> Result<(), CliError> {
    let mut cfg = load(scenario)?;
    if raster {
        cfg.fidelity = cuelanding::harness::Fidelity::Raster;
    }
    let ranges = ValidationSpec::parse_ranges(ranges).map_err(ConfigError::Invalid)?;
    let mut spec = ValidationSpec::new(ranges, trials);
    spec.seed = seed;
    let mut n = cfg.noise;
    if let Some(sigma) = noise {
        n.sigma_px = sigma;
    }
    let stats = vision_validation_sweep(&cfg, &n, &spec)?;
    output::create_dir(out)?;
    output::write_validation_csv(&stats, &out.join("validation.csv"))?;
    println!("range m | valid | max side cm | max vert cm | max fwd cm | max yaw deg | max filtered yaw deg");
    for s in &stats {
        println!(
            "{:7.1} | {:5} | {:11.2} | {:11.2} | {:10.2} | {:11.2} | {:20.2}",
            s.range,
            s.valid,
            100.0 * s.max_side,
            100.0 * s.max_vert,
            100.0 * s.max_fwd,
            s.max_yaw_deg,
            s.max_yaw_filtered_deg
        );
    }
    Ok(())
}

fn render_debug(pose: &str, scenario: Option<&Path>, seed: u64, out: &Path) -> Result<(), CliError> {
    let cfg = load(scenario)?;
    let bad_pose = || ConfigError::Invalid(format!("--pose {pose:?}: expected side,vertical,forward,yaw_deg"));
    let values: Vec<f64> = pose.split(',').map(|v| v.trim().parse()).collect::<Result<_, _>>().map_err(|_| bad_pose())?;
    let [x, y, z, yaw_deg] = values[..] else {
        return Err(bad_pose().into());
    };
    if !(z > 0.0) {
        return Err(ConfigError::Invalid("forward distance must be positive".into()).into());
    }
    let rs = RelativeState { x_side: x, y_vert: y, z_fwd: z, yaw: yaw_deg.to_radians(), t: 0.0, fresh: true };
    let cue = cfg.cue_model()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let img = render_cue_image(&cfg.camera, &Pose::from_camera_state(rs.position_in_cue(), rs.yaw), &cue, &cfg.noise, &mut rng);
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        output::create_dir(dir)?;
    }
    img.write_pgm(out).map_err(|source| OutputError::Io { path: out.to_path_buf(), source })?;
    match detect_cue(&img, cue.rows, cue.cols, &cfg.detector) {
        Ok(obs) => {
            let csv = out.with_extension("corners.csv");
            obs.write_csv(&csv).map_err(|source| OutputError::Io { path: csv.clone(), source })?;
            println!("detected {} corners, written to {}", obs.count(), csv.display());
        }
        Err(e) => println!("detection failed: {e}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // bad arguments count as configuration errors
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Run { scenario, seed, out } => run(scenario.as_deref(), *seed, out),
        Command::Batch { scenario, n, speeds, thresholds, seed, raster, out } => batch(scenario.as_deref(), *n, speeds, thresholds, *seed, *raster, out),
        Command::VisionValidate { scenario, ranges, trials, noise, seed, raster, out } => {
            validate(scenario.as_deref(), ranges, *trials, *noise, *seed, *raster, out)
        }
        Command::RenderDebug { pose, scenario, seed, out } => render_debug(pose, scenario.as_deref(), *seed, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(CliError::Output(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
