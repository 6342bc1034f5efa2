//! Least-squares fitting with concave and sorted penalties.

mod config;
mod inner;
mod lca;
mod oracle;
mod problem;

pub use config::{InnerSolver, Schedule, SolverConfig, StepRule};
pub use inner::{fista, fista_momentum, ista, InnerReport, POWER_ITERATIONS};
pub use lca::{
    concave_part_gradient, continuation_schedule, fit_lasso, fit_lca, lca_step, penalized_objective, FitResult,
    IterationCounts,
};
pub use oracle::oracle_lse;
pub use problem::{loss_gradient, Problem, COLUMN_NORM_RTOL};
