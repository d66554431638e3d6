//! Seeded Monte Carlo experiments over the sparsity / SNR / epsilon grid.

pub mod csv;
pub mod experiment;
pub mod spec;
pub mod trial;

pub use self::csv::{emit_csv, parse_csv, read_csv, to_csv_string, HEADER};
pub use experiment::{run_experiment, run_experiment_with_workers, ResultRow, ResultTable};
pub use spec::{ExperimentSpec, DEFAULT_TRIALS, EPSILON_GRID, PAPER_TRIALS};
pub use trial::{build_instance, run_trial, GridPoint, Instance, SolverRun, SolverSuccess, TrialOutcome};
