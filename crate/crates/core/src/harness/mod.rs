//! Scenario files, artifact generation and plotting for the command-line tool.

pub mod config;
pub mod run;
pub mod svg;

pub use config::{
    load_scenario, parse_scenario, ConfigError, LoadedScenario, ScenarioFile, SweepAxis, SweepSpec,
    DEFAULT_TRIALS, PAPER_SCALE_TRIALS,
};
pub use run::{Artifact, MseRow, RunError};

/// Environment variable that sets the worker-thread count.
pub const WORKERS_ENV: &str = "PASSLOC_WORKERS";
