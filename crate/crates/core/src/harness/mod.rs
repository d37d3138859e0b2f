//! Simulation comparing stratified and i.i.d. sampling under a fixed budget.

mod config;
mod experiment;
mod plan;
mod report;

pub use config::ExperimentConfig;
pub use experiment::{is_true_model, Arm, ArmOutcome, Cell, Experiment, MethodVariant};
pub use plan::{planning_table, write_plan_csv, PlanRow, PLAN_HEADER};
pub use report::{format_g, run_to_csv, Failure, TmrReport, TmrRow, CSV_HEADER};
