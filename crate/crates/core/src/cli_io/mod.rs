//! Configuration, checkpoints, CSV output and scenario driving.

pub mod checkpoint;
pub mod config;
pub mod output;
pub mod scenario;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};
pub use config::{parse_config, RunConfig};
pub use scenario::{resume_scenario, run_scenario, run_scenario_in, ScenarioOutcome};

/// Environment variable overriding the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "ANYON_SLAB_OUTPUT_DIR";
