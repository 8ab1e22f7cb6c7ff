//! Scenario files, runs, trajectory tables and plots for `sheaftrack`.
//!
//! A run goes config text → [`ScenarioConfig`] → [`load_scenario`] →
//! [`run`], which integrates the closed loop, checks the ultimate bound and
//! writes `trajectory.csv`, `summary.txt` and SVG plots.

pub mod build;
pub mod bundled;
pub mod config;
pub mod output;
pub mod plot;
pub mod run;

pub use build::{load_scenario, Group, Loaded, Overrides};
pub use config::{normalize, ScenarioConfig};
pub use output::Table;
pub use plot::emit_plots;
pub use run::{
    check, formation_residuals, load_config, run, simulate, sweep, CheckReport, FormationResiduals,
    RunSummary,
};
