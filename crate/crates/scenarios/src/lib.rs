//! Configuration files, scenario presets, result files and the command-line
//! front end for the `mtdiff` asynchronous multitask diffusion simulator.

pub mod config;
pub mod output;
pub mod presets;
pub mod runner;
pub mod spectrum;

pub use config::{load_config, parse_config, ConfigError, Mode, RunConfig, Scenario, ScenarioConfig, ValidationError, Weighting};
pub use output::{emit_csv, sig9};
pub use presets::{preset, preset_names};
pub use runner::{run_scenario, Activation, CaseResult, ResultBundle, ScenarioError, StabilitySummary};
pub use spectrum::{build_spectrum_model, support_recovery, SpectrumError, SpectrumModel, SpectrumScenario};
