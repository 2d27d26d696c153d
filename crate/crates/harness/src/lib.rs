//! Reproducible scenario runs over `strobo-core`: configuration, noise
//! injection, entropy and temperature diagnostics, and figure data.

pub mod config;
pub mod cooling;
pub mod noise;
pub mod output;
pub mod scenarios;

pub use config::{ConfigErrors, LoadError, ScenarioConfig, ScenarioKind};
pub use cooling::{cool_with_noise, CoolingReport};
pub use noise::{entropy_per_gate, Channel, EntropyReport, NoiseModel};
pub use output::{emit_figure_data, FigureInput, FigureKind, RunRecord};
pub use scenarios::{execute, run, Outcome, RunError};
