//! Configuration, scenario orchestration and reporting on top of `dampspec`.

pub mod config;
pub mod error;
pub mod pipeline;
pub mod report;
pub mod scenario;

pub use config::{validate_config, ExperimentConfig};
pub use error::RunError;
pub use report::{emit_report, ScenarioReport};
pub use scenario::run_scenario;
