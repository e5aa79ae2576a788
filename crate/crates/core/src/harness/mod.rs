//! Experiment orchestration: config files and presets, seeded multi-run
//! execution, sweeps, CSV output and the verification suite.

mod config;
mod report;
mod run;
pub mod verify;

pub use config::{preset, preset_names, preset_text, Algo, ExperimentConfig};
pub use report::{aggregate, write_report, AggRow, CsvReport, RawRow, RunSummary};
pub use run::{
    derive_seeds, execute, load_and_run, run_experiment, run_seed, setup, sweep, sweep_batch_size, sweep_configs,
    Setup, SweepParam,
};
