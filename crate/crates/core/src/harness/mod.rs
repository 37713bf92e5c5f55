//! Command-line plumbing: single runs, replay validation, frame export and
//! benchmark sweeps.

pub mod frames;
pub mod run;
pub mod sweep;
pub mod validate;

pub use run::{best_greedy_solution, run_planner, PlannerId, RunParams, RunRecord, Status, EXIT_PARSE_ERROR};
pub use sweep::{run_sweep, SweepResult, SweepSpec};
pub use validate::{validate_record, validate_sequence, ValidationReport};
