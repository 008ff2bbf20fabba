//! Experiment orchestration: configuration files, cell execution with
//! derived seeds, CSV output, the simulation-panel presets and gap sweeps.

pub mod config;
pub mod csv;
pub mod fig2;
pub mod gap;
pub mod run;

pub use config::{ExperimentConfig, NTrain, RunMethod, Sweep, SweepAxis};
pub use fig2::{summarize, Panel, SummaryRow};
pub use gap::{default_gap_config, gen_gap};
pub use run::{run, ResultRow};
