//! Reference implementations used as test oracles. Nothing here calls into
//! the library's penalty or prox code.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Penalty families written out from their integral definitions.
#[derive(Debug, Clone, Copy)]
pub enum RefFamily {
    L1,
    Mcp { kappa: f64 },
    Scad { kappa: f64 },
    /// Two-point mixture: weight `w` on `hi`, `1 − w` on `lo`.
    SpikeSlab { hi: f64, lo: f64, r: f64, w: f64 },
}

impl RefFamily {
    pub fn kappa_bar(&self) -> f64 {
        match *self {
            RefFamily::L1 => 0.0,
            RefFamily::Mcp { kappa } | RefFamily::Scad { kappa } => kappa,
            RefFamily::SpikeSlab { hi, lo, r, .. } => r * (hi - lo) * (hi - lo) / 4.0,
        }
    }

    /// `ρ(t; λ)`; the spike-and-slab ignores `λ`.
    pub fn value(&self, t: f64, lambda: f64) -> f64 {
        let a = t.abs();
        match *self {
            RefFamily::L1 => lambda * a,
            RefFamily::Mcp { kappa } => {
                // ∫_0^a (λ − κx)_+ dx
                if kappa == 0.0 {
                    return lambda * a;
                }
                let knot = lambda / kappa;
                let u = a.min(knot);
                lambda * u - kappa * u * u / 2.0
            }
            RefFamily::Scad { kappa } => {
                // ∫_0^a {λ − κ(x − λ)_+}_+ dx
                let flat = a.min(lambda);
                let mut v = lambda * flat;
                if a > lambda && kappa > 0.0 {
                    let end = lambda + lambda / kappa;
                    let u = a.min(end) - lambda;
                    v += lambda * u - kappa * u * u / 2.0;
                } else if a > lambda {
                    v += lambda * (a - lambda);
                }
                v
            }
            RefFamily::SpikeSlab { hi, lo, r, w } => {
                // −(1/r) log(w e^{−r hi a} + (1−w) e^{−r lo a}), shifted for stability
                let e1 = -r * hi * a;
                let e2 = -r * lo * a;
                let m = e1.max(e2);
                -(m + (w * (e1 - m).exp() + (1.0 - w) * (e2 - m).exp()).ln()) / r
            }
        }
    }
}

/// Coordinate descent for `‖y − Xb‖²/(2n) + λ‖b‖₁`.
pub fn cd_lasso(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> DVector<f64> {
    let (n, p) = x.shape();
    let nf = n as f64;
    let col_sq: Vec<f64> = (0..p).map(|j| x.column(j).norm_squared() / nf).collect();
    let mut b: DVector<f64> = DVector::zeros(p);
    let mut r = y.clone();
    for _sweep in 0..100_000 {
        let mut max_change = 0.0_f64;
        for j in 0..p {
            let xj = x.column(j);
            let rho = xj.dot(&r) / nf + col_sq[j] * b[j];
            let new = soft(rho, lambda) / col_sq[j];
            let d = new - b[j];
            if d != 0.0 {
                r.axpy(-d, &xj, 1.0);
                b[j] = new;
                max_change = max_change.max(d.abs());
            }
        }
        if max_change < 1e-14 {
            break;
        }
    }
    b
}

pub fn soft(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

/// Minimizer of a convex 1-D function: grid step 1e-3 on `[lo, hi]`, then
/// local refinement to 1e-5 and beyond.
pub fn grid_argmin(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let mut h = 1e-3;
    let (mut a, mut b) = (lo, hi);
    let mut best = lo;
    for _ in 0..4 {
        let steps = ((b - a) / h).ceil() as usize;
        let mut best_v = f64::INFINITY;
        for k in 0..=steps {
            let t = (a + k as f64 * h).min(b);
            let v = f(t);
            if v < best_v {
                best_v = v;
                best = t;
            }
        }
        // 0 is a common kink
        if a <= 0.0 && b >= 0.0 && f(0.0) <= best_v {
            best = 0.0;
        }
        a = best - 2.0 * h;
        b = best + 2.0 * h;
        h /= 100.0;
    }
    best
}

/// Minimizes `Σ_k c_k(m_k)` over `m_1 ≥ m_2 ≥ … ≥ m_p ≥ 0` on lattices of
/// shrinking spacing by dynamic programming; `upper` bounds the magnitudes.
pub fn chain_dp(costs: &[&dyn Fn(f64) -> f64], upper: f64) -> (Vec<f64>, f64) {
    let p = costs.len();
    let mut h = 1e-2;
    let mut ranges: Vec<(i64, i64)> = vec![(0, (upper / h).ceil() as i64 + 1); p];
    let mut sol = vec![0.0; p];
    let mut best = f64::INFINITY;
    for stage in 0..4 {
        // value[k][i] for lattice index ranges[k].0 + i
        let mut prev: Vec<(i64, f64, usize)> = Vec::new(); // suffix minima: (index, value, argidx)
        let mut choices: Vec<Vec<(i64, usize)>> = Vec::with_capacity(p);
        let mut store: Vec<Vec<(i64, f64, usize)>> = Vec::with_capacity(p);
        for k in 0..p {
            let (lo, hi) = ranges[k];
            let mut cur: Vec<(i64, f64, usize)> = Vec::with_capacity((hi - lo + 1) as usize);
            let mut choice = Vec::with_capacity((hi - lo + 1) as usize);
            let mut ptr = 0;
            for idx in lo..=hi {
                let m = idx as f64 * h;
                let c = costs[k](m);
                let (add, arg) = if k == 0 {
                    (0.0, usize::MAX)
                } else {
                    // min over prev entries with index ≥ idx
                    while ptr < prev.len() && prev[ptr].0 < idx {
                        ptr += 1;
                    }
                    match prev.get(ptr) {
                        Some(e) => (e.1, e.2),
                        None => (f64::INFINITY, usize::MAX),
                    }
                };
                cur.push((idx, c + add, cur.len()));
                choice.push((idx, arg));
            }
            // suffix minima of cur
            let mut suf = cur.clone();
            for i in (0..suf.len().saturating_sub(1)).rev() {
                if suf[i + 1].1 < suf[i].1 {
                    suf[i].1 = suf[i + 1].1;
                    suf[i].2 = suf[i + 1].2;
                }
            }
            prev = suf.clone();
            store.push(suf);
            choices.push(choice);
        }
        // backtrack from the best last-stage entry
        let last = &store[p - 1];
        let mut at = last[0].2;
        best = last[0].1;
        for k in (0..p).rev() {
            let (idx, arg) = choices[k][at];
            sol[k] = idx as f64 * h;
            if k > 0 {
                at = arg;
            }
        }
        if stage == 3 {
            break;
        }
        let radius = 30;
        let next_h = h / 20.0;
        for k in 0..p {
            let centre = (sol[k] / next_h).round() as i64;
            let span = radius * 20;
            ranges[k] = ((centre - span).max(0), centre + span);
        }
        h = next_h;
    }
    (sol, best)
}

pub fn permutations(p: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..p).collect();
    heap(p, &mut cur, &mut out);
    out
}

fn heap(k: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if k <= 1 {
        out.push(a.clone());
        return;
    }
    for i in 0..k - 1 {
        heap(k - 1, a, out);
        if k.is_multiple_of(2) {
            a.swap(i, k - 1);
        } else {
            a.swap(0, k - 1);
        }
    }
    heap(k - 1, a, out);
}

/// Brute-force sorted prox: minimizes
/// `‖b − x‖²/2 + step Σ_j {ρ(b#_j; λ_j) + κ (b#_j)²/2}` by trying every
/// assignment of ranks to coordinates and solving each chain problem on a grid.
/// A coarse pass keeps the assignments within a margin of the best one (at
/// least three, at most forty) for refinement.
pub fn brute_sorted_prox(x: &[f64], levels: &[f64], fam: RefFamily, step: f64, kappa: f64) -> Vec<f64> {
    let p = x.len();
    let upper = x.iter().fold(0.0_f64, |m, v| m.max(v.abs())) + 0.05;
    let cost_for = |coord: usize, rank: usize| {
        let xa = x[coord].abs();
        let lam = levels[rank];
        move |m: f64| 0.5 * (m - xa) * (m - xa) + step * (fam.value(m, lam) + 0.5 * kappa * m * m)
    };
    let mut scored: Vec<(f64, Vec<usize>)> = Vec::new();
    for perm in permutations(p) {
        // perm[rank] = coordinate holding that rank
        let fs: Vec<_> = (0..p).map(|rank| cost_for(perm[rank], rank)).collect();
        let refs: Vec<&dyn Fn(f64) -> f64> = fs.iter().map(|f| f as &dyn Fn(f64) -> f64).collect();
        let v = coarse_chain(&refs, upper);
        scored.push((v, perm));
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best: Option<(f64, Vec<f64>)> = None;
    let cutoff = scored[0].0 + 0.02 * (1.0 + scored[0].0.abs());
    let keep = scored.iter().take_while(|(v, _)| *v <= cutoff).count().clamp(3, 40);
    for (_, perm) in scored.into_iter().take(keep) {
        let fs: Vec<_> = (0..p).map(|rank| cost_for(perm[rank], rank)).collect();
        let refs: Vec<&dyn Fn(f64) -> f64> = fs.iter().map(|f| f as &dyn Fn(f64) -> f64).collect();
        let (m, v) = chain_dp(&refs, upper);
        if best.as_ref().is_none_or(|b| v < b.0) {
            let mut b = vec![0.0; p];
            for rank in 0..p {
                b[perm[rank]] = m[rank] * x[perm[rank]].signum();
            }
            best = Some((v, b));
        }
    }
    best.unwrap().1
}

fn coarse_chain(costs: &[&dyn Fn(f64) -> f64], upper: f64) -> f64 {
    let h = 1e-2;
    let g = (upper / h).ceil() as usize + 1;
    let mut suffix = vec![0.0; g + 1];
    for (k, c) in costs.iter().enumerate() {
        let mut cur = vec![0.0; g + 1];
        for i in 0..=g {
            cur[i] = c(i as f64 * h) + if k == 0 { 0.0 } else { suffix[i] };
        }
        for i in (0..g).rev() {
            cur[i] = cur[i].min(cur[i + 1]);
        }
        suffix = cur;
    }
    suffix[0]
}

/// Random non-increasing levels with `λ_1 ≤ top`.
pub fn random_levels(r: &mut impl Rng, p: usize, top: f64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..p).map(|_| r.random_range(0.0..top)).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Random design with columns rescaled to `‖x_j‖² = n`.
pub fn random_design(r: &mut impl Rng, n: usize, p: usize) -> DMatrix<f64> {
    let mut x = DMatrix::from_fn(n, p, |_, _| {
        let u: f64 = r.random_range(-1.0..1.0);
        let v: f64 = r.random_range(-1.0..1.0);
        u + v
    });
    for mut c in x.column_iter_mut() {
        let s = (n as f64).sqrt() / c.norm();
        c *= s;
    }
    x
}
