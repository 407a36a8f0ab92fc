//! Experiment harness for `afmc-core`: coefficient expressions, configuration,
//! presets and the run pipeline behind the `afmc` binary.

pub mod config;
pub mod expr;
pub mod presets;
pub mod run;

pub use config::{ConfigError, ExperimentConfig};
pub use expr::{parse_coefficient_expr, CoefficientExpr, ExprError};
pub use presets::{preset, preset_names};
pub use run::{run_experiment, RunError, RunManifest, RunOutcome};
