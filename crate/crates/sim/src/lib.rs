//! Closed-loop simulation of the adaptive quadrotor controller: configuration,
//! the simulation driver, telemetry output and run summaries.

// `!(x > 0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod harness;
pub mod metrics;
pub mod telemetry;

pub use config::{load_config, ConfigError, PlantMode, SimConfig};
pub use harness::{run_setup, run_simulation, Setup, SimResult, TelemetryRecord};
pub use metrics::{summarize, Metrics};
