//! Scenario files, swarm placement and the experiment drivers.

pub mod compare;
pub mod config;
pub mod generate;
pub mod library;
pub mod placement;
pub mod run;
pub mod sweep;

pub use compare::{compare, oracle, render_compare, render_oracle, CompareReport, OracleReport};
pub use config::{load_scenario, parse_scenario, FrozenInit, Mode, ScenarioConfig, TargetSpec};
pub use library::{library_scenario, SCENARIO_NAMES};
pub use placement::{place_swarm, Placement};
pub use run::{run_scenario, simulate, RunOptions, ScenarioOutput, Summary};
pub use sweep::{run_sweep, sweep, SweepAxis, SweepResult, DEFAULT_REPS};
