//! Config-driven experiment runner behind the `inflap` binary.

pub mod config;
pub mod presets;
pub mod report;
pub mod run;

pub use config::{parse_config, BoundarySpec, Centers, Check, ConfigError, ExperimentConfig, Format};
pub use presets::{preset, Preset, PRESETS};
pub use report::{emit_reports, fmt_float, summary_json};
pub use run::{config_hash, run, write_manifest, Results, RunError, RunOutcome, SolveSummary, Status};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "INFLAP_OUT_DIR";
