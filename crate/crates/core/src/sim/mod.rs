//! Simulation lab: seeded data generation, replication and aggregation.

pub mod config;
pub mod generate;
pub mod report;
pub mod run;
pub mod suite;

pub use config::{Correction, DesignKind, ExperimentConfig, GroupSignalReading, Method, Signal};
pub use report::{run_suite, RunManifest, RunOutcome};
pub use run::{run_experiment, Aggregates, Estimate, Trial, TrialReport};
pub use suite::{preset, preset_names, Suite, SuiteSpec};
