//! Univariate penalty families and the sorted penalties built from them.
//!
//! A family `ρ(t; λ)` is indexed by a penalty level `λ`. The maximum concavity
//! `kappa_bar` bounds how fast the derivative can decrease:
//! `(ρ̇(t) − ρ̇(t′)) / (t′ − t) ≤ kappa_bar` for all `0 < t < t′`.
//!
//! The SCAD family uses the single-parameter form whose derivative is
//! `{λ − κ̄(|t| − λ)₊}₊`; the classical `a` parameter corresponds to
//! `κ̄ = 1/(a − 1)`.

use serde::{Deserialize, Serialize};

use crate::error::{PlseError, Result};

/// Relative slack allowed when validating that level vectors are non-increasing.
pub const LEVEL_ORDER_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    L1,
    Mcp,
    Scad,
    SpikeSlab,
}

/// Two-atom mixing distribution for the spike-and-slab Lasso penalty.
///
/// `weight_hi` is the mass on `lambda_hi`; the remaining mass sits on
/// `lambda_lo`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpikeSlabParams {
    pub lambda_hi: f64,
    pub lambda_lo: f64,
    pub r_n: f64,
    pub weight_hi: f64,
}

impl SpikeSlabParams {
    fn validate(&self) -> Result<()> {
        if !(self.lambda_lo > 0.0 && self.lambda_lo.is_finite()) {
            return Err(PlseError::param("spike_slab.lambda_lo", "must be positive"));
        }
        if !(self.lambda_hi >= self.lambda_lo && self.lambda_hi.is_finite()) {
            return Err(PlseError::param(
                "spike_slab.lambda_hi",
                "must be finite and at least lambda_lo",
            ));
        }
        if !(self.r_n > 0.0 && self.r_n.is_finite()) {
            return Err(PlseError::param("spike_slab.r_n", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.weight_hi) {
            return Err(PlseError::param("spike_slab.weight_hi", "must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Mixture mean `∫ λ G(dλ)`, the penalty level at the origin.
    pub fn mean_level(&self) -> f64 {
        self.weight_hi * self.lambda_hi + (1.0 - self.weight_hi) * self.lambda_lo
    }

    /// Posterior weight on `lambda_hi` given `|t|`.
    fn tilted_weight_hi(&self, abs_t: f64) -> f64 {
        let gap = self.lambda_hi - self.lambda_lo;
        let w_hi = self.weight_hi * (-self.r_n * gap * abs_t).exp();
        let denom = w_hi + (1.0 - self.weight_hi);
        if denom > 0.0 {
            w_hi / denom
        } else {
            0.0
        }
    }
}

/// A univariate penalty family `ρ(t; λ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyFamily {
    kind: FamilyKind,
    kappa_bar: f64,
    spike_slab: Option<SpikeSlabParams>,
}

impl PenaltyFamily {
    pub fn l1() -> Self {
        PenaltyFamily {
            kind: FamilyKind::L1,
            kappa_bar: 0.0,
            spike_slab: None,
        }
    }

    pub fn mcp(kappa_bar: f64) -> Result<Self> {
        check_kappa(kappa_bar)?;
        Ok(PenaltyFamily {
            kind: FamilyKind::Mcp,
            kappa_bar,
            spike_slab: None,
        })
    }

    pub fn scad(kappa_bar: f64) -> Result<Self> {
        check_kappa(kappa_bar)?;
        Ok(PenaltyFamily {
            kind: FamilyKind::Scad,
            kappa_bar,
            spike_slab: None,
        })
    }

    /// Spike-and-slab Lasso mixture of two ℓ1 penalties. The concavity bound
    /// is `r_n (λ′ − λ″)² / 4`.
    pub fn spike_slab(params: SpikeSlabParams) -> Result<Self> {
        params.validate()?;
        let gap = params.lambda_hi - params.lambda_lo;
        Ok(PenaltyFamily {
            kind: FamilyKind::SpikeSlab,
            kappa_bar: params.r_n * gap * gap / 4.0,
            spike_slab: Some(params),
        })
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn kappa_bar(&self) -> f64 {
        self.kappa_bar
    }

    pub fn spike_slab_params(&self) -> Option<&SpikeSlabParams> {
        self.spike_slab.as_ref()
    }

    /// Penalty level at the origin, `ρ̇(0+; λ)`.
    pub fn level_at_zero(&self, lambda: f64) -> f64 {
        match self.spike_slab {
            Some(ss) => ss.mean_level(),
            None => lambda,
        }
    }

    /// `ρ(t; λ)` in closed form. `lambda` must be nonnegative; it is ignored
    /// by the spike-and-slab family.
    pub fn value(&self, t: f64, lambda: f64) -> f64 {
        let a = t.abs();
        let k = self.kappa_bar;
        match self.kind {
            FamilyKind::L1 => lambda * a,
            FamilyKind::Mcp => {
                if k == 0.0 || a * k <= lambda {
                    lambda * a - 0.5 * k * a * a
                } else {
                    0.5 * lambda * lambda / k
                }
            }
            FamilyKind::Scad => {
                if a <= lambda || k == 0.0 {
                    lambda * a
                } else if (a - lambda) * k <= lambda {
                    let d = a - lambda;
                    lambda * a - 0.5 * k * d * d
                } else {
                    lambda * lambda + 0.5 * lambda * lambda / k
                }
            }
            FamilyKind::SpikeSlab => {
                let ss = self.spike_slab.expect("spike-slab params");
                let gap = ss.lambda_hi - ss.lambda_lo;
                let mix = ss.weight_hi * (-ss.r_n * gap * a).exp() + (1.0 - ss.weight_hi);
                ss.lambda_lo * a - mix.ln() / ss.r_n
            }
        }
    }

    /// Derivative of `ρ(·; λ)` at `a > 0`. At `a = 0` this returns the
    /// right derivative `ρ̇(0+; λ)`.
    pub fn derivative_abs(&self, a: f64, lambda: f64) -> f64 {
        let k = self.kappa_bar;
        match self.kind {
            FamilyKind::L1 => lambda,
            FamilyKind::Mcp => (lambda - k * a).max(0.0),
            FamilyKind::Scad => (lambda - k * (a - lambda).max(0.0)).max(0.0),
            FamilyKind::SpikeSlab => {
                let ss = self.spike_slab.expect("spike-slab params");
                let w = ss.tilted_weight_hi(a);
                w * ss.lambda_hi + (1.0 - w) * ss.lambda_lo
            }
        }
    }

    /// Signed derivative `ρ̇(t; λ)` for `t ≠ 0`.
    pub fn derivative(&self, t: f64, lambda: f64) -> f64 {
        t.signum() * self.derivative_abs(t.abs(), lambda)
    }

    /// Points in `(0, ∞)` where the derivative is not smooth, for a given level.
    pub fn breakpoints(&self, lambda: f64) -> Vec<f64> {
        let k = self.kappa_bar;
        match self.kind {
            FamilyKind::Mcp if k > 0.0 => vec![lambda / k],
            FamilyKind::Scad if k > 0.0 => vec![lambda, lambda + lambda / k],
            _ => Vec::new(),
        }
    }
}

fn check_kappa(kappa_bar: f64) -> Result<()> {
    if kappa_bar >= 0.0 && kappa_bar.is_finite() {
        Ok(())
    } else {
        Err(PlseError::param("kappa_bar", "must be finite and nonnegative"))
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda >= 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(PlseError::domain(format!(
            "penalty level must be finite and nonnegative, got {lambda}"
        )))
    }
}

pub fn penalty_value(family: &PenaltyFamily, t: f64, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    Ok(family.value(t, lambda))
}

/// Single-valued derivative away from the origin. At `t = 0` the
/// sub-differential is an interval; use [`subgradient_interval`].
pub fn penalty_derivative(family: &PenaltyFamily, t: f64, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    if t == 0.0 {
        return Err(PlseError::domain(
            "derivative is set-valued at t = 0; use subgradient_interval",
        ));
    }
    Ok(family.derivative(t, lambda))
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn point(v: f64) -> Self {
        Interval { lo: v, hi: v }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

pub fn subgradient_interval(family: &PenaltyFamily, t: f64, lambda: f64) -> Result<Interval> {
    check_lambda(lambda)?;
    if t == 0.0 {
        let l = family.level_at_zero(lambda);
        Ok(Interval { lo: -l, hi: l })
    } else {
        Ok(Interval::point(family.derivative(t, lambda)))
    }
}

/// Indices of `v` ordered by decreasing `|v_j|`; ties keep index order.
pub fn magnitude_order(v: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].abs().total_cmp(&v[a].abs()).then(a.cmp(&b)));
    idx
}

/// A multivariate penalty: `w λ₁ ‖b‖₁ + (1 − w) Σ_j ρ(b_j^#; λ_j)` where
/// `b^#` is `|b|` sorted decreasingly and `w` is the ℓ1 blend weight.
///
/// Constant levels give the ordinary separable penalty.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltySpec {
    family: PenaltyFamily,
    levels: Vec<f64>,
    l1_blend_weight: f64,
}

impl PenaltySpec {
    pub fn new(family: PenaltyFamily, levels: Vec<f64>, l1_blend_weight: f64) -> Result<Self> {
        validate_levels(&levels)?;
        if !(0.0..=1.0).contains(&l1_blend_weight) {
            return Err(PlseError::param("l1_blend_weight", "must lie in [0, 1]"));
        }
        Ok(PenaltySpec {
            family,
            levels,
            l1_blend_weight,
        })
    }

    pub fn constant(family: PenaltyFamily, lambda: f64, p: usize) -> Result<Self> {
        check_lambda(lambda)?;
        Self::new(family, vec![lambda; p], 0.0)
    }

    pub fn family(&self) -> &PenaltyFamily {
        &self.family
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn l1_blend_weight(&self) -> f64 {
        self.l1_blend_weight
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Top level `λ₁` (zero for an empty spec).
    pub fn top_level(&self) -> f64 {
        self.levels.first().copied().unwrap_or(0.0)
    }

    pub fn is_constant(&self) -> bool {
        match (self.levels.first(), self.levels.last()) {
            (Some(a), Some(b)) => a == b,
            _ => true,
        }
    }

    /// Same family with different levels and blend weight.
    pub fn with_levels(&self, levels: Vec<f64>, l1_blend_weight: f64) -> Result<Self> {
        Self::new(self.family, levels, l1_blend_weight)
    }

    /// Absolute ℓ1 coefficient `w λ₁` of the blend term.
    pub fn l1_coefficient(&self) -> f64 {
        self.l1_blend_weight * self.top_level()
    }

    /// Weight `1 − w` on the sorted part.
    pub fn sorted_scale(&self) -> f64 {
        1.0 - self.l1_blend_weight
    }

    pub(crate) fn check_dim(&self, p: usize) -> Result<()> {
        if self.levels.len() != p {
            return Err(PlseError::DimensionMismatch {
                what: "penalty levels",
                expected: p,
                got: self.levels.len(),
            });
        }
        Ok(())
    }
}

fn validate_levels(levels: &[f64]) -> Result<()> {
    for (j, &l) in levels.iter().enumerate() {
        if !(l >= 0.0 && l.is_finite()) {
            return Err(PlseError::param(
                format!("levels[{j}]"),
                "must be finite and nonnegative",
            ));
        }
    }
    for (j, w) in levels.windows(2).enumerate() {
        if w[1] > w[0] + LEVEL_ORDER_SLACK * w[0].abs().max(1.0) {
            return Err(PlseError::param(
                format!("levels[{}]", j + 1),
                "levels must be non-increasing",
            ));
        }
    }
    Ok(())
}

/// `Σ_j ρ(b_j^#; λ_j)` blended with `λ₁‖b‖₁` according to the spec's weight.
pub fn sorted_penalty_value(b: &[f64], spec: &PenaltySpec) -> Result<f64> {
    spec.check_dim(b.len())?;
    Ok(sorted_penalty_unchecked(b, spec))
}

pub(crate) fn sorted_penalty_unchecked(b: &[f64], spec: &PenaltySpec) -> f64 {
    let order = magnitude_order(b);
    let family = spec.family();
    let sorted: f64 = order
        .iter()
        .zip(spec.levels())
        .map(|(&k, &lambda)| family.value(b[k], lambda))
        .sum();
    let w = spec.l1_blend_weight();
    if w > 0.0 {
        let l1: f64 = b.iter().map(|v| v.abs()).sum();
        w * spec.top_level() * l1 + (1.0 - w) * sorted
    } else {
        sorted
    }
}

/// `λ_{*,j} = A₀ σ √((2/n) log(p/(α j)))` for `j = 1..p`.
pub fn sorted_lambda_sequence(p: usize, n: usize, sigma: f64, a0: f64, alpha: f64) -> Result<Vec<f64>> {
    if p == 0 || n == 0 {
        return Err(PlseError::domain("p and n must be at least 1"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(PlseError::domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(PlseError::domain("sigma must be positive"));
    }
    if !(a0 > 0.0 && a0.is_finite()) {
        return Err(PlseError::domain("A0 must be positive"));
    }
    let scale = a0 * sigma * (2.0 / n as f64).sqrt();
    Ok((1..=p)
        .map(|j| scale * (p as f64 / (alpha * j as f64)).ln().sqrt())
        .collect())
}

/// `λ_* = (σ/η) √((2/n) log p)`.
pub fn universal_lambda(sigma: f64, n: usize, p: usize, eta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(PlseError::domain(format!("eta must lie in (0, 1], got {eta}")));
    }
    if p < 2 || n == 0 {
        return Err(PlseError::domain("universal level needs p >= 2 and n >= 1"));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(PlseError::domain("sigma must be positive"));
    }
    Ok(sigma / eta * (2.0 / n as f64 * (p as f64).ln()).sqrt())
}

/// Weighted sorted ℓ1 norm `Σ_j (λ_{s+j}/λ_{s+1}) b_j^#` of a vector of length `p − s`.
pub fn sorted_dual_norm(b: &[f64], levels: &[f64], s: usize) -> Result<f64> {
    let p = levels.len();
    if s >= p {
        return Err(PlseError::domain(format!("s = {s} must be smaller than p = {p}")));
    }
    if b.len() != p - s {
        return Err(PlseError::DimensionMismatch {
            what: "off-support vector",
            expected: p - s,
            got: b.len(),
        });
    }
    let base = levels[s];
    if !(base > 0.0) {
        return Err(PlseError::domain("level lambda_{s+1} must be positive"));
    }
    let mut mags: Vec<f64> = b.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    Ok(mags
        .iter()
        .zip(&levels[s..])
        .map(|(m, l)| m * l / base)
        .sum())
}

/// Levels and ℓ1 blend weight at continuation step `t`:
/// `λ_j^{(t)} = max(λ_{*,j}, θ^t λ_{*,1})`, weight `θ^t`.
pub fn continuation_levels(base_levels: &[f64], theta: f64, t: usize) -> (Vec<f64>, f64) {
    let weight = theta.powi(t.min(i32::MAX as usize) as i32);
    let top = base_levels.first().copied().unwrap_or(0.0);
    let floor = weight * top;
    (base_levels.iter().map(|&l| l.max(floor)).collect(), weight)
}

// JSON interchange.

/// Level vector description as it appears in penalty JSON files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LevelsConfig {
    Constant {
        lambda: f64,
    },
    Sorted {
        #[serde(rename = "A0")]
        a0: f64,
        alpha: f64,
        sigma: f64,
    },
    /// Constant level at the universal value `(σ/η)√((2/n) log p)`.
    Universal {
        sigma: f64,
        #[serde(default = "one")]
        eta: f64,
    },
    Explicit {
        values: Vec<f64>,
    },
}

fn one() -> f64 {
    1.0
}

/// JSON form of a [`PenaltySpec`]. Sorted and constant levels are resolved
/// once the problem size is known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub family: FamilyKind,
    #[serde(default)]
    pub kappa_bar: f64,
    pub levels: LevelsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spike_slab: Option<SpikeSlabParams>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub l1_blend_weight: f64,
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

impl PenaltyConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn family(&self) -> Result<PenaltyFamily> {
        match self.family {
            FamilyKind::L1 => {
                if self.kappa_bar != 0.0 {
                    return Err(PlseError::param("kappa_bar", "must be 0 for the l1 family"));
                }
                Ok(PenaltyFamily::l1())
            }
            FamilyKind::Mcp => PenaltyFamily::mcp(self.kappa_bar),
            FamilyKind::Scad => PenaltyFamily::scad(self.kappa_bar),
            FamilyKind::SpikeSlab => {
                let params = self
                    .spike_slab
                    .ok_or_else(|| PlseError::param("spike_slab", "required for family spike_slab"))?;
                PenaltyFamily::spike_slab(params)
            }
        }
    }

    /// Builds the spec for a problem with `n` observations and `p` coefficients.
    pub fn resolve(&self, n: usize, p: usize) -> Result<PenaltySpec> {
        let family = self.family()?;
        let levels = match &self.levels {
            LevelsConfig::Constant { lambda } => {
                check_lambda(*lambda).map_err(|_| PlseError::param("levels.lambda", "must be nonnegative"))?;
                vec![*lambda; p]
            }
            LevelsConfig::Sorted { a0, alpha, sigma } => sorted_lambda_sequence(p, n, *sigma, *a0, *alpha)?,
            LevelsConfig::Universal { sigma, eta } => vec![universal_lambda(*sigma, n, p, *eta)?; p],
            LevelsConfig::Explicit { values } => {
                if values.len() != p {
                    return Err(PlseError::DimensionMismatch {
                        what: "levels.values",
                        expected: p,
                        got: values.len(),
                    });
                }
                values.clone()
            }
        };
        PenaltySpec::new(family, levels, self.l1_blend_weight)
    }

    /// Explicit-level JSON form of a resolved spec.
    pub fn from_spec(spec: &PenaltySpec) -> Self {
        let family = spec.family();
        PenaltyConfig {
            name: None,
            family: family.kind(),
            kappa_bar: family.kappa_bar(),
            levels: LevelsConfig::Explicit {
                values: spec.levels().to_vec(),
            },
            spike_slab: family.spike_slab_params().copied(),
            l1_blend_weight: spec.l1_blend_weight(),
        }
    }

    pub fn label(&self, index: usize) -> String {
        self.name.clone().unwrap_or_else(|| {
            let fam = match self.family {
                FamilyKind::L1 => "l1",
                FamilyKind::Mcp => "mcp",
                FamilyKind::Scad => "scad",
                FamilyKind::SpikeSlab => "spike_slab",
            };
            format!("{fam}#{index}")
        })
    }
}
