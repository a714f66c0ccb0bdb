//! Scenario ingestion, the simulation loop, trace output and presets.

pub mod config;
pub mod experiments;
pub mod output;
pub mod presets;
pub mod run;

pub use config::ScenarioConfig;
pub use run::{run_scenario, ControllerKind, MabRow, RunSummary, RunTrace, Scenario, TraceRow};
