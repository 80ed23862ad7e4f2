//! Configuration, experiments and result files behind the command line.

mod cache;
mod config;
mod experiments;
mod report;

pub use cache::{EigenCache, Leader};
pub use config::{apply_override, parse_config, parse_str, Experiment, Initial, Preset, Resolved, SimConfig};
pub use experiments::{Lab, COMMANDS};
pub use report::{emit_results, num, run_dir, Check, OutputFile, Report};
