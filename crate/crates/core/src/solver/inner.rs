//! Proximal-gradient solvers for the convex LCA subproblem
//! `min_b L(b) + Pen₊(b) − bᵀtilt`, where `Pen₊` is the convexified penalty.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::config::{SolverConfig, StepRule};
use super::problem::Problem;
use crate::diagnostics::SortedSubdifferential;
use crate::error::{PlseError, Result};
use crate::penalty::{sorted_penalty_unchecked, PenaltySpec};
use crate::prox::{sorted_prox_with, ConvexCoordinate};

/// Power-iteration steps used for the fixed step size.
pub const POWER_ITERATIONS: usize = 50;
/// Multiplier on the power-iteration estimate, which approaches the top
/// eigenvalue from below.
const POWER_MARGIN: f64 = 1.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerReport {
    pub iterations: usize,
    pub kkt_inf: f64,
    pub converged: bool,
    /// Last step size `1/L`.
    pub step: f64,
}

/// Lipschitz estimate carried across inner solves of one fit.
#[derive(Debug, Clone, Copy)]
pub(crate) struct StepState {
    pub lipschitz: f64,
}

impl StepState {
    pub fn new(problem: &Problem, config: &SolverConfig) -> Self {
        let lipschitz = match (config.lipschitz_estimate, config.step_rule) {
            (Some(l), _) => l,
            (None, StepRule::Fixed) => POWER_MARGIN * problem.gram_top_eigenvalue(POWER_ITERATIONS),
            (None, StepRule::Backtracking) => problem.max_gram_diagonal(),
        };
        StepState {
            lipschitz: if lipschitz > 0.0 { lipschitz } else { 1.0 },
        }
    }
}

pub(crate) struct Subproblem<'a> {
    pub problem: &'a Problem,
    pub spec: &'a PenaltySpec,
    pub kappa: f64,
    pub tilt: &'a DVector<f64>,
}

impl<'a> Subproblem<'a> {
    fn coordinate(&self, step: f64) -> Result<ConvexCoordinate<'a>> {
        ConvexCoordinate::blended(
            self.spec.family(),
            step,
            self.spec.l1_coefficient(),
            self.spec.sorted_scale(),
            self.kappa,
        )
    }

    /// `L(b) + Pen₊(b) − bᵀtilt` given the residual `y − Xb`.
    pub fn objective(&self, b: &DVector<f64>, resid: &DVector<f64>) -> f64 {
        let loss = resid.norm_squared() / (2.0 * self.problem.n() as f64);
        let quad = 0.5 * self.spec.sorted_scale() * self.kappa * b.norm_squared();
        loss + sorted_penalty_unchecked(b.as_slice(), self.spec) + quad - b.dot(self.tilt)
    }

    /// Sup-norm stationarity residual given `Xᵀ(y − Xb)/n`.
    fn stationarity(&self, b: &DVector<f64>, corr: &DVector<f64>) -> f64 {
        let g: Vec<f64> = corr.iter().zip(self.tilt.iter()).map(|(c, t)| c + t).collect();
        SortedSubdifferential::of_spec(self.spec, self.kappa)
            .residual(b.as_slice(), &g)
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn solve(
        &self,
        start: &DVector<f64>,
        config: &SolverConfig,
        accelerate: bool,
        state: &mut StepState,
    ) -> Result<(DVector<f64>, InnerReport)> {
        let pb = self.problem;
        let n = pb.n() as f64;
        let fixed = config.step_rule == StepRule::Fixed;
        let shrink = config.backtracking_shrink;

        let xb0 = pb.x() * start;
        let r0 = pb.y() - &xb0;
        let corr0 = pb.correlation_of_residual(&r0);
        let res0 = self.stationarity(start, &corr0);
        if res0 <= config.inner_tol {
            return Ok((
                start.clone(),
                InnerReport {
                    iterations: 0,
                    kkt_inf: res0,
                    converged: true,
                    step: 1.0 / state.lipschitz,
                },
            ));
        }
        let f_start = self.objective(start, &r0);

        let mut b_prev = start.clone();
        let mut xb_prev = xb0.clone();
        let mut corr_prev = corr0.clone();
        let mut r_prev = r0;
        let mut x = start.clone();
        let mut xx = xb0;
        let mut corr_x = corr0;
        let mut momentum = 1.0_f64;
        let mut residual = res0;
        let mut iterations = 0;
        let mut converged = false;

        for k in 1..=config.inner_max_iters {
            iterations = k;
            let mut loss_x = if fixed {
                0.0
            } else {
                (pb.y() - &xx).norm_squared() / (2.0 * n)
            };
            let mut resynced = false;
            let (b, xb, r) = loop {
                let step = 1.0 / state.lipschitz;
                let coord = self.coordinate(step)?;
                let v = &x + (&corr_x + self.tilt) * step;
                let b = DVector::from_vec(sorted_prox_with(v.as_slice(), self.spec.levels(), &coord));
                let xb = pb.x() * &b;
                let r = pb.y() - &xb;
                if fixed {
                    break (b, xb, r);
                }
                let d = &b - &x;
                let loss_b = r.norm_squared() / (2.0 * n);
                let bound = loss_x - corr_x.dot(&d) + 0.5 * state.lipschitz * d.norm_squared();
                if !loss_b.is_finite() {
                    return Err(PlseError::Divergence { step });
                }
                if loss_b <= bound + 1e-13 * (1.0 + loss_x.abs()) {
                    break (b, xb, r);
                }
                if !resynced {
                    // the extrapolated X·x and correlation drift by rounding
                    resynced = true;
                    xx = pb.x() * &x;
                    let rx = pb.y() - &xx;
                    loss_x = rx.norm_squared() / (2.0 * n);
                    corr_x = pb.correlation_of_residual(&rx);
                    continue;
                }
                state.lipschitz /= shrink;
                if !state.lipschitz.is_finite() {
                    return Err(PlseError::Divergence { step });
                }
            };
            let corr_b = pb.correlation_of_residual(&r);
            if b.iter().chain(corr_b.iter()).any(|v| !v.is_finite()) {
                return Err(PlseError::Divergence {
                    step: 1.0 / state.lipschitz,
                });
            }
            residual = self.stationarity(&b, &corr_b);

            if accelerate {
                let next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
                let beta = (momentum - 1.0) / next;
                momentum = next;
                x = &b + (&b - &b_prev) * beta;
                xx = &xb + (&xb - &xb_prev) * beta;
                corr_x = &corr_b + (&corr_b - &corr_prev) * beta;
            } else {
                x = b.clone();
                xx = xb.clone();
                corr_x = corr_b.clone();
            }
            b_prev = b;
            xb_prev = xb;
            corr_prev = corr_b;
            r_prev = r;
            if residual <= config.inner_tol {
                converged = true;
                break;
            }
        }

        let step = 1.0 / state.lipschitz;
        if self.objective(&b_prev, &r_prev) > f_start + 1e-13 * (1.0 + f_start.abs()) {
            // never return a point worse than the start for the MM chain
            return Ok((
                start.clone(),
                InnerReport {
                    iterations,
                    kkt_inf: res0,
                    converged: false,
                    step,
                },
            ));
        }
        Ok((
            b_prev,
            InnerReport {
                iterations,
                kkt_inf: residual,
                converged,
                step,
            },
        ))
    }
}

fn check_dims(problem: &Problem, tilt: &DVector<f64>, spec: &PenaltySpec, start: &DVector<f64>) -> Result<()> {
    let p = problem.p();
    spec.check_dim(p)?;
    for (what, len) in [("tilt", tilt.len()), ("start", start.len())] {
        if len != p {
            return Err(PlseError::DimensionMismatch { what, expected: p, got: len });
        }
    }
    Ok(())
}

fn run(
    problem: &Problem,
    tilt: &DVector<f64>,
    spec: &PenaltySpec,
    start: &DVector<f64>,
    config: &SolverConfig,
    accelerate: bool,
) -> Result<(DVector<f64>, InnerReport)> {
    config.validate()?;
    check_dims(problem, tilt, spec, start)?;
    let sub = Subproblem {
        problem,
        spec,
        kappa: spec.family().kappa_bar(),
        tilt,
    };
    let mut state = StepState::new(problem, config);
    sub.solve(start, config, accelerate, &mut state)
}

/// Proximal gradient iterations
/// `b^{k+1} = prox(b^k − t∇L(b^k) + t·tilt; t·Pen₊)`.
pub fn ista(
    problem: &Problem,
    tilt: &DVector<f64>,
    spec: &PenaltySpec,
    start: &DVector<f64>,
    config: &SolverConfig,
) -> Result<(DVector<f64>, InnerReport)> {
    run(problem, tilt, spec, start, config, false)
}

/// Accelerated proximal gradient with momentum
/// `t_{k+1} = (1 + √(1 + 4t_k²))/2`, extrapolation `(t_k − 1)/t_{k+1}`.
pub fn fista(
    problem: &Problem,
    tilt: &DVector<f64>,
    spec: &PenaltySpec,
    start: &DVector<f64>,
    config: &SolverConfig,
) -> Result<(DVector<f64>, InnerReport)> {
    run(problem, tilt, spec, start, config, true)
}

/// Momentum sequence `t_1 = 1, t_{k+1} = (1 + √(1 + 4t_k²))/2`.
pub fn fista_momentum(steps: usize) -> Vec<f64> {
    let mut t = vec![1.0_f64];
    for _ in 1..steps {
        let last = *t.last().unwrap();
        t.push(0.5 * (1.0 + (1.0 + 4.0 * last * last).sqrt()));
    }
    t
}
