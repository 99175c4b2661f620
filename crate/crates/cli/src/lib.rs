//! Configuration-driven runner: synthesise or load measurements, run the
//! exponent continuation, and write per-rung diagnostics.

pub mod config;
pub mod pipeline;

pub use config::{Config, ConfigError};
pub use pipeline::{run_experiment, Outcome};
