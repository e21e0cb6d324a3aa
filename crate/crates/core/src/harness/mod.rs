//! Episode runner, Monte-Carlo batches, vision validation and output files.

pub mod batch;
pub mod config;
pub mod episode;
pub mod output;
pub mod validation;

pub use batch::{run_batch, run_batch_grid, split_seed, summarize, BatchSummary, CellSummary, EpisodeOutcome};
pub use config::{ConfigError, CueSpec, Fidelity, InitialCondition, ScenarioConfig};
pub use episode::{episode_rng, run_episode, EpisodeLog, LandingResult, ModeTag, TickRecord};
pub use output::OutputError;
pub use validation::{vision_validation_sweep, RangeStats, ValidationSpec};
