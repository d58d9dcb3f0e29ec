//! Benchmark harness for the LQR-CBF-RRT* planner: TOML scenario configs,
//! seeded multi-baseline execution, and line-delimited result export.

pub mod config;
pub mod export;
pub mod run;

pub use config::{ConfigError, ScenarioConfig};
pub use export::{export_results, summary_text};
pub use run::{audit_result, euclidean_path_length, run_scenario, Baseline, RunReport, SeedRow};
