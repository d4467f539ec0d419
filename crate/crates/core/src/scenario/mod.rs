//! Scenario configuration, reproduction runs, and their on-disk artifacts.

pub mod config;
pub mod csv;
pub mod plot;
pub mod run;

pub use config::{load_config, parse_override, ScenarioConfig};
pub use csv::{read_csv, write_csv, CsvTable};
pub use plot::{render_plots, Curve, FigureSpec};
pub use run::{
    compare_costs, run_scenario, run_scenario_detailed, run_sweep, run_verify, CostComparison, RunManifest,
    SweepMember, SweepReport, VerifyReport,
};
