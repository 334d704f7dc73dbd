//! Benchmark definition, oracle, configuration and experiment driver.

pub mod config;
pub mod experiment;
pub mod front;
pub mod mini_zeno;
pub mod oracle;

pub use front::{ParetoFront, Provenance};
pub use oracle::{brute_force_pareto, OracleBounds, OracleError};
pub use config::{ConfigError, Engine, ExperimentConfig, Instance, Objective, Settings};
pub use experiment::{run_experiment, write_outputs, ExperimentReport, RunReport};
