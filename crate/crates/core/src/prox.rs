//! Proximal mappings of convexified (sorted) penalties.
//!
//! Everything here works with the convexified family
//! `ρ₊(b; λ) = ρ(b; λ) + κ b²/2` with `κ ≥ κ̄(ρ)`, optionally blended with an
//! ℓ1 term. The sorted prox reduces to an isotonic prox on `|x|` sorted
//! decreasingly, which is solved by pooling adjacent violators.

use crate::error::{PlseError, Result};
use crate::penalty::{magnitude_order, FamilyKind, PenaltyFamily, PenaltySpec, LEVEL_ORDER_SLACK};

/// Width below which bisection on a block derivative stops (relative to the bracket).
const BISECTION_REL_TOL: f64 = 1e-15;
const BISECTION_MAX_ITERS: usize = 200;
/// Relative slack used when checking the indicator pattern of a block candidate.
const INDICATOR_SLACK: f64 = 1e-12;

/// Per-coordinate convex penalty `step · (l1·b + scale·(ρ(b; λ) + kappa·b²/2))`
/// restricted to `b ≥ 0`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvexCoordinate<'a> {
    pub family: &'a PenaltyFamily,
    pub step: f64,
    pub l1: f64,
    pub scale: f64,
    pub kappa: f64,
}

impl<'a> ConvexCoordinate<'a> {
    pub fn new(family: &'a PenaltyFamily, step: f64, convexify_kappa: f64) -> Result<Self> {
        Self::blended(family, step, 0.0, 1.0, convexify_kappa)
    }

    pub fn blended(family: &'a PenaltyFamily, step: f64, l1: f64, scale: f64, kappa: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(PlseError::domain(format!("step must be positive, got {step}")));
        }
        let kb = family.kappa_bar();
        if !(kappa.is_finite() && kappa >= kb - LEVEL_ORDER_SLACK * kb.max(1.0)) {
            return Err(PlseError::domain(format!(
                "convexification {kappa} is below the family concavity {kb}; subproblem is not convex"
            )));
        }
        Ok(ConvexCoordinate {
            family,
            step,
            l1,
            scale,
            kappa: kappa.max(kb),
        })
    }

    /// Penalty value (without the step) at `b ≥ 0`.
    pub fn penalty(&self, b: f64, lambda: f64) -> f64 {
        self.l1 * b + self.scale * (self.family.value(b, lambda) + 0.5 * self.kappa * b * b)
    }

    /// Right derivative of the stepped penalty at `b ≥ 0`.
    fn slope(&self, b: f64, lambda: f64) -> f64 {
        self.step * (self.l1 + self.scale * (self.family.derivative_abs(b, lambda) + self.kappa * b))
    }

    /// Derivative of the block objective `Σ (x_j − b)²/2 + step·pen(b; λ_j)` at `b`.
    fn block_slope(&self, b: f64, xs: &[f64], lambdas: &[f64]) -> f64 {
        xs.iter()
            .zip(lambdas)
            .map(|(&x, &l)| b - x + self.slope(b, l))
            .sum()
    }

    pub fn block_objective(&self, b: f64, xs: &[f64], lambdas: &[f64]) -> f64 {
        xs.iter()
            .zip(lambdas)
            .map(|(&x, &l)| 0.5 * (x - b) * (x - b) + self.step * self.penalty(b, l))
            .sum()
    }

    /// Univariate prox for `x ≥ 0`.
    pub fn prox_nonneg(&self, x: f64, lambda: f64) -> f64 {
        match self.family.kind() {
            FamilyKind::Mcp => self.prox_mcp(x, lambda),
            FamilyKind::L1 => {
                let num = x - self.step * (self.l1 + self.scale * lambda);
                if num <= 0.0 {
                    0.0
                } else {
                    num / (1.0 + self.step * self.scale * self.kappa)
                }
            }
            _ => self.block_generic(&[x], &[lambda]),
        }
    }

    /// MCP closed form; with no blend this is
    /// `min{(x − tλ)₊, x/(1 + tκ̄)}`.
    fn prox_mcp(&self, x: f64, lambda: f64) -> f64 {
        let s = self.step;
        let kf = self.family.kappa_bar();
        if x <= s * (self.l1 + self.scale * lambda) {
            return 0.0;
        }
        let soft = (x - s * (self.l1 + self.scale * lambda)) / (1.0 + s * self.scale * (self.kappa - kf));
        if kf == 0.0 || kf * soft < lambda {
            soft
        } else {
            (x - s * self.l1) / (1.0 + s * self.scale * self.kappa)
        }
    }

    /// Minimizer over `b ≥ 0` of the block objective for any family.
    pub fn block_generic(&self, xs: &[f64], lambdas: &[f64]) -> f64 {
        if self.block_slope(0.0, xs, lambdas) >= 0.0 {
            return 0.0;
        }
        let hi = xs.iter().cloned().fold(0.0, f64::max);
        match self.family.kind() {
            FamilyKind::L1 => {
                let m = xs.len() as f64;
                let sx: f64 = xs.iter().sum();
                let sl: f64 = lambdas.iter().sum();
                let s = self.step;
                ((sx - s * (m * self.l1 + self.scale * sl)) / (m * (1.0 + s * self.scale * self.kappa))).max(0.0)
            }
            FamilyKind::Mcp | FamilyKind::Scad => self.block_piecewise(xs, lambdas, hi),
            FamilyKind::SpikeSlab => self.block_bisect(xs, lambdas, hi),
        }
    }

    /// The block derivative is continuous and piecewise linear between the
    /// family breakpoints; locate the bracketing segment and interpolate.
    fn block_piecewise(&self, xs: &[f64], lambdas: &[f64], hi: f64) -> f64 {
        let mut knots: Vec<f64> = lambdas
            .iter()
            .flat_map(|&l| self.family.breakpoints(l))
            .filter(|&k| k > 0.0 && k < hi)
            .collect();
        knots.push(hi);
        knots.sort_by(f64::total_cmp);
        knots.dedup();
        let mut lo = 0.0;
        let mut d_lo = self.block_slope(0.0, xs, lambdas);
        for &k in &knots {
            let d_k = self.block_slope(k, xs, lambdas);
            if d_k >= 0.0 {
                if d_k == d_lo {
                    return k;
                }
                return lo - d_lo * (k - lo) / (d_k - d_lo);
            }
            lo = k;
            d_lo = d_k;
        }
        hi
    }

    fn block_bisect(&self, xs: &[f64], lambdas: &[f64], hi: f64) -> f64 {
        let (mut lo, mut hi) = (0.0_f64, hi);
        for _ in 0..BISECTION_MAX_ITERS {
            let mid = 0.5 * (lo + hi);
            if self.block_slope(mid, xs, lambdas) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= BISECTION_REL_TOL * hi.max(1.0) {
                break;
            }
        }
        0.5 * (lo + hi)
    }
}

pub fn prox_univariate(x: f64, family: &PenaltyFamily, lambda: f64, step: f64, convexify_kappa: f64) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(PlseError::domain("penalty level must be nonnegative"));
    }
    let coord = ConvexCoordinate::new(family, step, convexify_kappa)?;
    Ok(signed(x, coord.prox_nonneg(x.abs(), lambda)))
}

fn signed(x: f64, magnitude: f64) -> f64 {
    if magnitude == 0.0 {
        0.0
    } else {
        magnitude.copysign(x)
    }
}

fn check_iso_input(x: &[f64], levels: &[f64]) -> Result<()> {
    if x.len() != levels.len() {
        return Err(PlseError::DimensionMismatch {
            what: "levels",
            expected: x.len(),
            got: levels.len(),
        });
    }
    if x.iter().any(|&v| !(v >= 0.0)) || x.windows(2).any(|w| w[1] > w[0]) {
        return Err(PlseError::Unsorted("x must be nonnegative and non-increasing"));
    }
    if levels
        .windows(2)
        .any(|w| w[1] > w[0] + LEVEL_ORDER_SLACK * w[0].abs().max(1.0))
    {
        return Err(PlseError::Unsorted("levels must be non-increasing"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy)]
struct Block {
    start: usize,
    len: usize,
    value: f64,
}

/// Stack-based pooling of adjacent violators. `solve(start, len)` returns the
/// common minimizer of a block.
fn pool_adjacent<F>(initial: impl Iterator<Item = f64>, mut solve: F) -> Vec<Block>
where
    F: FnMut(usize, usize) -> f64,
{
    let mut stack: Vec<Block> = Vec::new();
    for (j, v) in initial.enumerate() {
        stack.push(Block {
            start: j,
            len: 1,
            value: v,
        });
        while stack.len() >= 2 {
            let top = stack[stack.len() - 1];
            let below = stack[stack.len() - 2];
            if top.value <= below.value {
                break;
            }
            stack.truncate(stack.len() - 2);
            let len = below.len + top.len;
            stack.push(Block {
                start: below.start,
                len,
                value: solve(below.start, len),
            });
        }
    }
    stack
}

fn expand(blocks: &[Block], p: usize) -> Vec<f64> {
    let mut out = vec![0.0; p];
    for b in blocks {
        let v = if b.value == 0.0 { 0.0 } else { b.value };
        out[b.start..b.start + b.len].fill(v);
    }
    out
}

pub(crate) fn iso_prox_with(x: &[f64], levels: &[f64], coord: &ConvexCoordinate<'_>) -> Vec<f64> {
    let init = x.iter().zip(levels).map(|(&xj, &l)| coord.prox_nonneg(xj, l));
    let blocks = pool_adjacent(init, |start, len| {
        coord.block_generic(&x[start..start + len], &levels[start..start + len])
    });
    expand(&blocks, x.len())
}

/// Isotonic prox: minimizes `Σ_j (x_j − b_j)²/2 + step·ρ₊(b_j; λ_j)` over
/// `b₁ ≥ … ≥ b_p ≥ 0` for sorted nonnegative `x` and sorted levels.
pub fn iso_prox(x: &[f64], levels: &[f64], family: &PenaltyFamily, step: f64, convexify_kappa: f64) -> Result<Vec<f64>> {
    check_iso_input(x, levels)?;
    let coord = ConvexCoordinate::new(family, step, convexify_kappa)?;
    Ok(iso_prox_with(x, levels, &coord))
}

/// Block value for convexified MCP by enumerating the prefix of levels with
/// `λ_j > κ̄ b`. Inputs are global prefix sums so each candidate is O(1).
struct McpBlockSolver<'a> {
    coord: &'a ConvexCoordinate<'a>,
    x: &'a [f64],
    levels: &'a [f64],
    cum_x: Vec<f64>,
    cum_l: Vec<f64>,
}

impl<'a> McpBlockSolver<'a> {
    fn new(coord: &'a ConvexCoordinate<'a>, x: &'a [f64], levels: &'a [f64]) -> Self {
        let prefix = |v: &[f64]| {
            let mut acc = Vec::with_capacity(v.len() + 1);
            acc.push(0.0);
            let mut s = 0.0;
            for &e in v {
                s += e;
                acc.push(s);
            }
            acc
        };
        McpBlockSolver {
            coord,
            x,
            levels,
            cum_x: prefix(x),
            cum_l: prefix(levels),
        }
    }

    /// Candidate with the first `m` entries of the block in the soft-threshold regime.
    fn candidate(&self, start: usize, len: usize, m: usize) -> f64 {
        let c = self.coord;
        let s = c.step;
        let kf = c.family.kappa_bar();
        let sx = self.cum_x[start + len] - self.cum_x[start];
        let sl = self.cum_l[start + m] - self.cum_l[start];
        let num = sx - s * len as f64 * c.l1 - s * c.scale * sl;
        let den = len as f64 + s * c.scale * (m as f64 * (c.kappa - kf) + (len - m) as f64 * c.kappa);
        num / den
    }

    fn consistent(&self, start: usize, len: usize, m: usize, b: f64) -> bool {
        let kf = self.coord.family.kappa_bar();
        let kb = kf * b;
        let slack = INDICATOR_SLACK * kb.abs().max(1.0);
        let prefix_ok = m == 0 || self.levels[start + m - 1] > kb - slack;
        let suffix_ok = m == len || self.levels[start + m] <= kb + slack;
        prefix_ok && suffix_ok
    }

    fn solve(&self, start: usize, len: usize) -> f64 {
        let c = self.coord;
        let xs = &self.x[start..start + len];
        let ls = &self.levels[start..start + len];
        // b = 0 is optimal when the right derivative at zero is nonnegative
        let sx = self.cum_x[start + len] - self.cum_x[start];
        let sl = self.cum_l[start + len] - self.cum_l[start];
        if sx <= c.step * (len as f64 * c.l1 + c.scale * sl) {
            return 0.0;
        }
        let mut best: Option<(f64, f64)> = None;
        for m in 0..=len {
            let b = self.candidate(start, len, m);
            if b <= 0.0 || !self.consistent(start, len, m, b) {
                continue;
            }
            let obj = c.block_objective(b, xs, ls);
            if best.is_none_or(|(_, o)| obj < o) {
                best = Some((b, obj));
            }
        }
        match best {
            Some((b, _)) => b,
            None => c.block_generic(xs, ls),
        }
    }
}

pub(crate) fn iso_prox_mcp_with(x: &[f64], levels: &[f64], coord: &ConvexCoordinate<'_>) -> Vec<f64> {
    let solver = McpBlockSolver::new(coord, x, levels);
    let init = x.iter().zip(levels).map(|(&xj, &l)| coord.prox_nonneg(xj, l));
    let blocks = pool_adjacent(init, |start, len| solver.solve(start, len));
    expand(&blocks, x.len())
}

/// Isotonic prox specialized to convexified MCP (`κ = κ̄`), solving each
/// merged block through the fixed-point equation
/// `b = Σ(x_j − tλ_j I{λ_j > κ̄b}) / Σ(1 + tκ̄ I{λ_j ≤ κ̄b})`.
pub fn iso_prox_mcp(x: &[f64], levels: &[f64], step: f64, kappa_bar: f64) -> Result<Vec<f64>> {
    check_iso_input(x, levels)?;
    let family = PenaltyFamily::mcp(kappa_bar)?;
    let coord = ConvexCoordinate::new(&family, step, kappa_bar)?;
    Ok(iso_prox_mcp_with(x, levels, &coord))
}

pub(crate) fn sorted_prox_with(x: &[f64], levels: &[f64], coord: &ConvexCoordinate<'_>) -> Vec<f64> {
    let order = magnitude_order(x);
    let mags: Vec<f64> = order.iter().map(|&k| x[k].abs()).collect();
    let iso = if coord.family.kind() == FamilyKind::Mcp {
        iso_prox_mcp_with(&mags, levels, coord)
    } else {
        iso_prox_with(&mags, levels, coord)
    };
    let mut out = vec![0.0; x.len()];
    for (pos, &k) in order.iter().enumerate() {
        out[k] = signed(x[k], iso[pos]);
    }
    out
}

/// Prox of `step · [w λ₁‖b‖₁ + (1 − w)(ρ_#(b; λ) + κ‖b‖²/2)]` where `w` is
/// the spec's blend weight and `κ = convexify_kappa ≥ κ̄`.
pub fn sorted_prox(x: &[f64], spec: &PenaltySpec, step: f64, convexify_kappa: f64) -> Result<Vec<f64>> {
    spec.check_dim(x.len())?;
    let coord = ConvexCoordinate::blended(
        spec.family(),
        step,
        spec.l1_coefficient(),
        spec.sorted_scale(),
        convexify_kappa,
    )?;
    Ok(sorted_prox_with(x, spec.levels(), &coord))
}

/// Input to a sorted proximal evaluation.
#[derive(Debug, Clone)]
pub struct ProxRequest {
    pub x: Vec<f64>,
    pub spec: PenaltySpec,
    pub step: f64,
}

impl ProxRequest {
    /// Evaluates the prox with the family's own concavity as convexification.
    pub fn evaluate(&self) -> Result<Vec<f64>> {
        sorted_prox(&self.x, &self.spec, self.step, self.spec.family().kappa_bar())
    }
}
