use serde::{Deserialize, Serialize};

use crate::error::{PlseError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerSolver {
    Ista,
    Fista,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// `1/L` with `L` from `lipschitz_estimate` or 50 power-iteration steps.
    Fixed,
    /// Grow `L` by `1/backtracking_shrink` until the quadratic upper bound holds.
    Backtracking,
}

/// How penalty levels move towards the target during the outer loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    /// Only the target penalty.
    None,
    /// `λ_j^{(t)} = max(λ_j, θ^t λ₁)` blended with `θ^t λ₁‖b‖₁`.
    Blend,
    /// `λ^{(t)} = max(1, A₀θ^t) λ` with `A₀ = ‖Xᵀy/n‖_∞ / λ₁`.
    Proportional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub inner_solver: InnerSolver,
    pub inner_max_iters: usize,
    /// Sup-norm stationarity tolerance of the convex subproblem.
    pub inner_tol: f64,
    pub outer_max_iters: usize,
    /// Stop when `‖b^{(t)} − b^{(t−1)}‖₂` falls below this after the schedule.
    pub outer_tol: f64,
    pub step_rule: StepRule,
    pub lipschitz_estimate: Option<f64>,
    pub backtracking_shrink: f64,
    pub schedule: Schedule,
    pub continuation_theta: f64,
    /// Number of schedule steps before the target penalty; defaults to the
    /// smallest `t` with `θ^t ≤ 1/log p` for the blend schedule.
    pub schedule_steps: Option<usize>,
    pub objective_trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            inner_solver: InnerSolver::Fista,
            inner_max_iters: 20_000,
            inner_tol: 1e-8,
            outer_max_iters: 500,
            outer_tol: 1e-8,
            step_rule: StepRule::Backtracking,
            lipschitz_estimate: None,
            backtracking_shrink: 0.5,
            schedule: Schedule::Blend,
            continuation_theta: 0.8,
            schedule_steps: None,
            objective_trace: true,
        }
    }
}

impl SolverConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SolverConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.inner_tol > 0.0) {
            return Err(PlseError::param("inner_tol", "must be positive"));
        }
        if !(self.outer_tol > 0.0) {
            return Err(PlseError::param("outer_tol", "must be positive"));
        }
        if self.inner_max_iters == 0 {
            return Err(PlseError::param("inner_max_iters", "must be at least 1"));
        }
        if self.outer_max_iters == 0 {
            return Err(PlseError::param("outer_max_iters", "must be at least 1"));
        }
        if !(self.backtracking_shrink > 0.0 && self.backtracking_shrink < 1.0) {
            return Err(PlseError::param("backtracking_shrink", "must lie in (0, 1)"));
        }
        if !(self.continuation_theta > 0.0 && self.continuation_theta < 1.0) {
            return Err(PlseError::param("continuation_theta", "must lie in (0, 1)"));
        }
        if let Some(l) = self.lipschitz_estimate {
            if !(l > 0.0 && l.is_finite()) {
                return Err(PlseError::param("lipschitz_estimate", "must be positive"));
            }
        }
        Ok(())
    }

    /// Default blend-schedule length for `p` coefficients.
    pub fn default_blend_steps(&self, p: usize) -> usize {
        let log_p = (p as f64).ln();
        if log_p <= 1.0 {
            return 0;
        }
        ((1.0 / log_p).ln() / self.continuation_theta.ln()).ceil().max(0.0) as usize
    }
}
