//! Scenario-driven frontend for the `eptraj` solvers.

pub mod run;
pub mod scenario;
pub mod validate;

pub use run::{fmt_f64, load, run_file, run_scenario, CliError, RunOptions, RunOutcome};
pub use scenario::{parse, Scenario, SystemKind};
pub use validate::{validate_text, Finding};
