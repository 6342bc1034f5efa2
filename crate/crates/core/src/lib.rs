//! Penalized least squares with concave and sorted concave penalties.
//!
//! The estimator minimizes `‖y − Xb‖²/(2n) + Pen(b)` where `Pen` is either a
//! separable penalty (L1, MCP, SCAD, spike-and-slab) or its sorted version,
//! which assigns the `j`-th largest level to the `j`-th largest `|b|`. Fits
//! are computed by local convex approximation with ISTA/FISTA inner loops.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod penalty;
pub mod prox;
pub mod simulation;
pub mod solver;

pub use error::{PlseError, Result};
pub use penalty::{FamilyKind, PenaltyConfig, PenaltyFamily, PenaltySpec, SpikeSlabParams};
pub use solver::{fit_lasso, fit_lca, FitResult, Problem, SolverConfig};

/// Shortest decimal form that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let s = format!("{v:?}");
    s.strip_suffix(".0").map(str::to_string).unwrap_or(s)
}
