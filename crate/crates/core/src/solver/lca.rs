//! Local convex approximation: each outer step linearizes the concave part
//! `Pen₋(b) = (1 − w) κ̄ ‖b‖²/2` at the previous iterate and solves the
//! resulting convex problem with ISTA/FISTA.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::config::{InnerSolver, Schedule, SolverConfig};
use super::inner::{InnerReport, StepState, Subproblem};
use super::problem::Problem;
use crate::diagnostics::kkt_residual;
use crate::error::{PlseError, Result};
use crate::penalty::{continuation_levels, sorted_penalty_unchecked, PenaltyFamily, PenaltySpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationCounts {
    pub outer: usize,
    /// Inner iterations per outer step, schedule steps included.
    pub inner: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    #[serde(rename = "beta")]
    pub beta_hat: Vec<f64>,
    /// Objective under the target penalty, from the end of the schedule on.
    pub objective_trace: Vec<f64>,
    /// Objective under the penalty of each schedule step; not monotone.
    #[serde(default)]
    pub schedule_objective_trace: Vec<f64>,
    #[serde(rename = "kkt_inf")]
    pub kkt_residual_inf: f64,
    #[serde(rename = "kkt_l2")]
    pub kkt_residual_l2: f64,
    pub iterations: IterationCounts,
    pub active_set: Vec<usize>,
    pub converged: bool,
}

impl FitResult {
    pub fn beta(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.beta_hat)
    }
}

/// `L(b) + Pen(b)`.
pub fn penalized_objective(problem: &Problem, b: &DVector<f64>, spec: &PenaltySpec) -> f64 {
    problem.loss(b) + sorted_penalty_unchecked(b.as_slice(), spec)
}

/// Gradient of `Pen₋` at `b`: `(1 − w) κ̄ b`.
pub fn concave_part_gradient(spec: &PenaltySpec, b: &DVector<f64>) -> DVector<f64> {
    b * (spec.sorted_scale() * spec.family().kappa_bar())
}

fn lca_step_with(
    problem: &Problem,
    b_old: &DVector<f64>,
    spec: &PenaltySpec,
    config: &SolverConfig,
    state: &mut StepState,
) -> Result<(DVector<f64>, InnerReport)> {
    let tilt = concave_part_gradient(spec, b_old);
    let sub = Subproblem {
        problem,
        spec,
        kappa: spec.family().kappa_bar(),
        tilt: &tilt,
    };
    sub.solve(b_old, config, config.inner_solver == InnerSolver::Fista, state)
}

/// One MM step from `b_old`, warm-started at `b_old`.
pub fn lca_step(
    problem: &Problem,
    b_old: &DVector<f64>,
    spec: &PenaltySpec,
    config: &SolverConfig,
) -> Result<(DVector<f64>, InnerReport)> {
    config.validate()?;
    spec.check_dim(problem.p())?;
    if b_old.len() != problem.p() {
        return Err(PlseError::DimensionMismatch {
            what: "b_old",
            expected: problem.p(),
            got: b_old.len(),
        });
    }
    let mut state = StepState::new(problem, config);
    lca_step_with(problem, b_old, spec, config, &mut state)
}

/// Penalties visited before the target one.
pub fn continuation_schedule(problem: &Problem, spec: &PenaltySpec, config: &SolverConfig) -> Result<Vec<PenaltySpec>> {
    let theta = config.continuation_theta;
    match config.schedule {
        Schedule::None => Ok(Vec::new()),
        Schedule::Blend => {
            let steps = config
                .schedule_steps
                .unwrap_or_else(|| config.default_blend_steps(problem.p()));
            (0..steps)
                .map(|t| {
                    let (levels, w) = continuation_levels(spec.levels(), theta, t);
                    spec.with_levels(levels, w.max(spec.l1_blend_weight()))
                })
                .collect()
        }
        Schedule::Proportional => {
            let top = spec.family().level_at_zero(spec.top_level());
            if !(top > 0.0) {
                return Ok(Vec::new());
            }
            let a0 = (problem.max_abs_correlation_at_zero() / top).max(1.0);
            let cap = config.schedule_steps.unwrap_or(usize::MAX);
            let mut out = Vec::new();
            let mut t = 0;
            while out.len() < cap {
                let a = a0 * theta.powi(t);
                if a <= 1.0 {
                    break;
                }
                let levels = spec.levels().iter().map(|l| l * a).collect();
                out.push(spec.with_levels(levels, spec.l1_blend_weight())?);
                t += 1;
            }
            Ok(out)
        }
    }
}

/// Iterated LCA with continuation towards `spec`.
pub fn fit_lca(
    problem: &Problem,
    spec: &PenaltySpec,
    config: &SolverConfig,
    start: Option<&DVector<f64>>,
) -> Result<FitResult> {
    config.validate()?;
    let p = problem.p();
    spec.check_dim(p)?;
    let mut b = match start {
        Some(s) if s.len() != p => {
            return Err(PlseError::DimensionMismatch {
                what: "start",
                expected: p,
                got: s.len(),
            })
        }
        Some(s) => s.clone(),
        None => DVector::zeros(p),
    };
    let mut state = StepState::new(problem, config);
    let mut inner_counts = Vec::new();
    let mut schedule_trace = Vec::new();
    let mut trace = Vec::new();
    let mut outer = 0;
    let mut last_inner_ok = true;

    for stage in continuation_schedule(problem, spec, config)? {
        if outer >= config.outer_max_iters {
            break;
        }
        let (next, rep) = lca_step_with(problem, &b, &stage, config, &mut state)?;
        b = next;
        outer += 1;
        inner_counts.push(rep.iterations);
        last_inner_ok = rep.converged;
        if config.objective_trace {
            schedule_trace.push(penalized_objective(problem, &b, &stage));
        }
    }

    if config.objective_trace {
        trace.push(penalized_objective(problem, &b, spec));
    }
    let mut outer_converged = false;
    while outer < config.outer_max_iters {
        let (next, rep) = lca_step_with(problem, &b, spec, config, &mut state)?;
        outer += 1;
        inner_counts.push(rep.iterations);
        last_inner_ok = rep.converged;
        let delta = (&next - &b).norm();
        b = next;
        if config.objective_trace {
            trace.push(penalized_objective(problem, &b, spec));
        }
        if delta <= config.outer_tol {
            outer_converged = true;
            break;
        }
    }

    let kkt = kkt_residual(problem, b.as_slice(), spec)?;
    let beta_hat: Vec<f64> = b.iter().map(|&v| if v == 0.0 { 0.0 } else { v }).collect();
    let active_set = beta_hat
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(j, _)| j)
        .collect();
    Ok(FitResult {
        beta_hat,
        objective_trace: trace,
        schedule_objective_trace: schedule_trace,
        kkt_residual_inf: kkt.inf_norm,
        kkt_residual_l2: kkt.l2_norm,
        iterations: IterationCounts {
            outer,
            inner: inner_counts,
        },
        active_set,
        converged: outer_converged && last_inner_ok,
    })
}

/// Lasso at level `lambda`; a single convex solve.
pub fn fit_lasso(problem: &Problem, lambda: f64, config: &SolverConfig) -> Result<FitResult> {
    let spec = PenaltySpec::constant(PenaltyFamily::l1(), lambda, problem.p())?;
    let cfg = SolverConfig {
        schedule: Schedule::None,
        ..config.clone()
    };
    fit_lca(problem, &spec, &cfg, None)
}
