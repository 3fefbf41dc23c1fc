//! Scenario orchestration for the geodesic-flow laboratory: configuration
//! parsing, deterministic seeded experiments, and report emission.

pub mod config;
pub mod report;
pub mod scenarios;

pub use config::ScenarioConfig;
pub use report::{CheckRecord, ReportFormat, ScenarioReport, SeriesTable, ValueSource};
pub use scenarios::{run_scenario, SCENARIOS};
