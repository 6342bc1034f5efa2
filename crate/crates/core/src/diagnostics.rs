//! Residuals of the estimating equation `Xᵀ(y − Xb)/n ∈ ∂Pen(b)` and error
//! metrics against a reference vector.
//!
//! The sub-differential of a sorted penalty at `b` is assembled from its
//! nonzero entries (sorted by magnitude, each carrying `ρ̇(b_{k_j}; λ_j)`) and
//! the remaining levels spread over the zero entries. The reported residual is
//! the minimal-norm `ν` with `g − ν` in that set, where the convex hull over
//! admissible level assignments is used both for tied nonzero magnitudes and
//! for the zero block.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{PlseError, Result};
use crate::penalty::{magnitude_order, sorted_dual_norm, PenaltyFamily, PenaltySpec};
use crate::prox::{sorted_prox_with, ConvexCoordinate};
use crate::solver::Problem;

/// Slack used for the coordinate-wise explicit-condition flags in [`KktReport`].
pub const BOX_CHECK_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    pub residual_vector: Vec<f64>,
    pub inf_norm: f64,
    pub l2_norm: f64,
    /// Explicit solution conditions per coordinate; only for constant-level,
    /// unblended penalties.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_coordinate_box_check: Option<Vec<bool>>,
}

impl KktReport {
    fn from_residual(residual_vector: Vec<f64>) -> Self {
        let inf_norm = residual_vector.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let l2_norm = residual_vector.iter().map(|v| v * v).sum::<f64>().sqrt();
        KktReport {
            residual_vector,
            inf_norm,
            l2_norm,
            per_coordinate_box_check: None,
        }
    }
}

/// Sub-differential of `l1‖b‖₁ + scale·(ρ_#(b; λ) + kappa‖b‖²/2)`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SortedSubdifferential<'a> {
    pub family: &'a PenaltyFamily,
    pub levels: &'a [f64],
    pub l1: f64,
    pub scale: f64,
    pub kappa: f64,
}

impl<'a> SortedSubdifferential<'a> {
    pub fn of_spec(spec: &'a PenaltySpec, kappa: f64) -> Self {
        SortedSubdifferential {
            family: spec.family(),
            levels: spec.levels(),
            l1: spec.l1_coefficient(),
            scale: spec.sorted_scale(),
            kappa,
        }
    }

    fn derivative_at(&self, mag: f64, lambda: f64) -> f64 {
        self.l1 + self.scale * (self.family.derivative_abs(mag, lambda) + self.kappa * mag)
    }

    fn box_at(&self, lambda: f64) -> f64 {
        self.l1 + self.scale * self.family.level_at_zero(lambda)
    }

    /// `g − proj(g)` onto the constructed set at `b`.
    pub fn residual(&self, b: &[f64], g: &[f64]) -> Vec<f64> {
        let p = b.len();
        let order = magnitude_order(b);
        let support = b.iter().filter(|v| **v != 0.0).count();
        let mut res = vec![0.0; p];

        let mut start = 0;
        while start < support {
            let mag = b[order[start]].abs();
            let mut end = start + 1;
            while end < support && b[order[end]].abs() == mag {
                end += 1;
            }
            if end - start == 1 {
                let k = order[start];
                let d = self.derivative_at(mag, self.levels[start]);
                let z = b[k].signum() * g[k];
                res[k] = b[k].signum() * (z - d);
            } else {
                self.tied_group(b, g, &order[start..end], &self.levels[start..end], mag, &mut res);
            }
            start = end;
        }

        if support < p {
            let zeros = &order[support..];
            let gz: Vec<f64> = zeros.iter().map(|&k| g[k]).collect();
            let boxes: Vec<f64> = self.levels[support..].iter().map(|&l| self.box_at(l)).collect();
            // Moreau: g − proj onto the sorted dual ball is the sorted-ℓ1 prox of g
            let unit = PenaltyFamily::l1();
            let coord = ConvexCoordinate {
                family: &unit,
                step: 1.0,
                l1: 0.0,
                scale: 1.0,
                kappa: 0.0,
            };
            let r = sorted_prox_with(&gz, &boxes, &coord);
            for (&k, v) in zeros.iter().zip(r) {
                res[k] = v;
            }
        }
        res
    }

    /// Projection onto the permutahedron of the derivative values of a group
    /// of equal nonzero magnitudes: `z − v = iso↓(z_sorted − d_sorted)`.
    fn tied_group(&self, b: &[f64], g: &[f64], members: &[usize], levels: &[f64], mag: f64, res: &mut [f64]) {
        let mut d: Vec<f64> = levels.iter().map(|&l| self.derivative_at(mag, l)).collect();
        d.sort_by(|a, b| b.total_cmp(a));
        let z: Vec<f64> = members.iter().map(|&k| b[k].signum() * g[k]).collect();
        let mut rank: Vec<usize> = (0..members.len()).collect();
        rank.sort_by(|&i, &j| z[j].total_cmp(&z[i]).then(i.cmp(&j)));
        let u: Vec<f64> = rank.iter().zip(&d).map(|(&i, &dv)| z[i] - dv).collect();
        let w = mean_isotonic_nonincreasing(&u);
        for (pos, &i) in rank.iter().enumerate() {
            let k = members[i];
            res[k] = b[k].signum() * w[pos];
        }
    }
}

/// Least-squares non-increasing fit of `u` with unit weights.
fn mean_isotonic_nonincreasing(u: &[f64]) -> Vec<f64> {
    // (sum, count) blocks
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(u.len());
    for &v in u {
        blocks.push((v, 1));
        while blocks.len() >= 2 {
            let (s1, c1) = blocks[blocks.len() - 1];
            let (s0, c0) = blocks[blocks.len() - 2];
            if s1 / c1 as f64 <= s0 / c0 as f64 {
                break;
            }
            blocks.truncate(blocks.len() - 2);
            blocks.push((s0 + s1, c0 + c1));
        }
    }
    blocks
        .into_iter()
        .flat_map(|(s, c)| std::iter::repeat_n(s / c as f64, c))
        .collect()
}

fn check_len(problem: &Problem, b: &[f64]) -> Result<()> {
    if b.len() != problem.p() {
        return Err(PlseError::DimensionMismatch {
            what: "coefficient vector",
            expected: problem.p(),
            got: b.len(),
        });
    }
    Ok(())
}

/// Residual of the estimating equation for the (raw) penalty `spec` at `b`.
pub fn kkt_residual(problem: &Problem, b: &[f64], spec: &PenaltySpec) -> Result<KktReport> {
    check_len(problem, b)?;
    spec.check_dim(problem.p())?;
    let bv = DVector::from_column_slice(b);
    let g = problem.correlation(&bv);
    let sub = SortedSubdifferential::of_spec(spec, 0.0);
    let mut report = KktReport::from_residual(sub.residual(b, g.as_slice()));
    if spec.is_constant() && spec.l1_blend_weight() == 0.0 && !spec.is_empty() {
        let lambda = spec.family().level_at_zero(spec.top_level());
        report.per_coordinate_box_check = Some(explicit_conditions_from_correlation(
            b,
            g.as_slice(),
            lambda,
            spec.family().kappa_bar(),
            BOX_CHECK_SLACK,
        ));
    }
    Ok(report)
}

/// Residual for the convexified LCA subproblem: the gradient term is
/// `Xᵀ(y − Xb)/n + tilt` and the penalty carries `kappa‖b‖²/2` on its sorted part.
pub fn kkt_residual_convexified(
    problem: &Problem,
    b: &[f64],
    spec: &PenaltySpec,
    kappa: f64,
    tilt: &[f64],
) -> Result<KktReport> {
    check_len(problem, b)?;
    check_len(problem, tilt)?;
    spec.check_dim(problem.p())?;
    let bv = DVector::from_column_slice(b);
    let mut g = problem.correlation(&bv);
    for (gi, t) in g.iter_mut().zip(tilt) {
        *gi += t;
    }
    let sub = SortedSubdifferential::of_spec(spec, kappa);
    Ok(KktReport::from_residual(sub.residual(b, g.as_slice())))
}

fn explicit_conditions_from_correlation(b: &[f64], g: &[f64], lambda: f64, kappa_star: f64, slack: f64) -> Vec<bool> {
    b.iter()
        .zip(g)
        .map(|(&bj, &gj)| {
            if bj != 0.0 {
                let s = bj.signum() * gj;
                (lambda - kappa_star * bj.abs()).max(0.0) <= s + slack && s <= lambda + slack
            } else {
                gj.abs() <= lambda + slack
            }
        })
        .collect()
}

/// Coordinate-wise explicit conditions
/// `(λ − κ_*|b_j|)₊ ≤ sgn(b_j) x_jᵀ(y − Xb)/n ≤ λ` for `b_j ≠ 0` and
/// `|x_jᵀ(y − Xb)/n| ≤ λ` for `b_j = 0`, each with additive `slack`.
pub fn check_explicit_conditions(problem: &Problem, b: &[f64], lambda: f64, kappa_star: f64, slack: f64) -> Result<Vec<bool>> {
    check_len(problem, b)?;
    let g = problem.correlation(&DVector::from_column_slice(b));
    Ok(explicit_conditions_from_correlation(b, g.as_slice(), lambda, kappa_star, slack))
}

/// Terms of the split-bound test: `(‖ν₂‖₂ + η₁‖λ_{1:s}‖₂, λ_{s+1} r₂)`.
pub fn split_bound_terms(residual: &[f64], levels: &[f64], s: usize, eta1: f64, r2: f64) -> Result<(f64, f64)> {
    let p = levels.len();
    if residual.len() != p {
        return Err(PlseError::DimensionMismatch {
            what: "residual vector",
            expected: p,
            got: residual.len(),
        });
    }
    if s >= p {
        return Err(PlseError::domain(format!("s = {s} must be smaller than p = {p}")));
    }
    if !(levels[s] > 0.0) {
        return Err(PlseError::domain("level lambda_{s+1} must be positive"));
    }
    if !(eta1 > 0.0 && eta1 < 1.0) {
        return Err(PlseError::domain("eta1 must lie in (0, 1)"));
    }
    if !(r2 >= 0.0) {
        return Err(PlseError::domain("r2 must be nonnegative"));
    }
    let mut mags: Vec<f64> = residual.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let nu2: f64 = mags
        .iter()
        .zip(levels)
        .map(|(&m, &l)| (m - eta1 * l).max(0.0).powi(2))
        .sum::<f64>()
        .sqrt();
    let head: f64 = levels[..s].iter().map(|l| l * l).sum::<f64>().sqrt();
    Ok((nu2 + eta1 * head, levels[s] * r2))
}

/// Sufficient condition for the split bound on `ν`: decompose `ν = ν₁ + ν₂`
/// with `ν₁` the sorted residual clipped to `η₁λ_j` and test
/// `‖ν₂‖₂ + η₁‖λ_{1:s}‖₂ ≤ λ_{s+1} r₂`.
pub fn check_split_bound(residual: &[f64], levels: &[f64], s: usize, eta1: f64, r2: f64) -> Result<bool> {
    let (lhs, rhs) = split_bound_terms(residual, levels, s, eta1, r2)?;
    Ok(lhs <= rhs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportRecovery {
    pub true_positives: usize,
    pub false_positives: usize,
    pub sign_agreement: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    /// `‖Xb̂ − Xb_ref‖₂²/n`
    pub prediction: f64,
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lq: Option<(f64, f64)>,
    /// Weighted sorted ℓ1 norm of the error off the true support; `None`
    /// when `λ_{s+1} = 0`.
    pub sorted_l1: Option<f64>,
    pub support_recovery: SupportRecovery,
}

pub fn error_metrics(
    problem: &Problem,
    b_hat: &[f64],
    b_ref: &[f64],
    true_support: &[usize],
    levels: &[f64],
    q: Option<f64>,
) -> Result<ErrorMetrics> {
    check_len(problem, b_hat)?;
    check_len(problem, b_ref)?;
    let p = problem.p();
    if levels.len() != p {
        return Err(PlseError::DimensionMismatch {
            what: "levels",
            expected: p,
            got: levels.len(),
        });
    }
    let diff: Vec<f64> = b_hat.iter().zip(b_ref).map(|(a, b)| a - b).collect();
    let fitted = problem.x() * DVector::from_column_slice(&diff);
    let prediction = fitted.norm_squared() / problem.n() as f64;
    let l1 = diff.iter().map(|v| v.abs()).sum();
    let l2 = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
    let linf = diff.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let lq = q.map(|q| (q, diff.iter().map(|v| v.abs().powf(q)).sum::<f64>().powf(1.0 / q)));

    let mut in_support = vec![false; p];
    for &j in true_support {
        if j >= p {
            return Err(PlseError::param("true_support", format!("index {j} out of range")));
        }
        in_support[j] = true;
    }
    let s = in_support.iter().filter(|v| **v).count();
    let off: Vec<f64> = (0..p).filter(|&j| !in_support[j]).map(|j| diff[j]).collect();
    let sorted_l1 = if s >= p {
        Some(0.0)
    } else if levels[s] > 0.0 {
        Some(sorted_dual_norm(&off, levels, s)?)
    } else {
        None
    };

    let true_positives = (0..p).filter(|&j| in_support[j] && b_hat[j] != 0.0).count();
    let false_positives = (0..p).filter(|&j| !in_support[j] && b_hat[j] != 0.0).count();
    let sign_agreement = b_hat.iter().zip(b_ref).all(|(a, b)| sign(*a) == sign(*b));

    Ok(ErrorMetrics {
        prediction,
        l1,
        l2,
        linf,
        lq,
        sorted_l1,
        support_recovery: SupportRecovery {
            true_positives,
            false_positives,
            sign_agreement,
        },
    })
}

fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}
