//! Batch experiment runner: configuration, scenario dispatch, result files
//! and record comparison.

pub mod compare;
pub mod config;
pub mod record;
pub mod run;

pub use compare::{compare, CompareReport, Tolerance, ToleranceSpec};
pub use config::{ExperimentConfig, ObservableKind, RawConfig, ScenarioKind};
pub use record::{ResultRecord, WrittenFiles};
pub use run::run;
