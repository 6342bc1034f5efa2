//! Acceptance criteria, one line each on stderr.

mod common;

use std::io::Write;
use std::time::Instant;

use common::{brute_sorted_prox, cd_lasso, grid_argmin, permutations, random_design, random_levels, rng, RefFamily};
use nalgebra::{DMatrix, DVector};
use plse::cli::{figure1_rows, figure2_rows};
use plse::diagnostics::{check_explicit_conditions, kkt_residual, kkt_residual_convexified};
use plse::penalty::{sorted_penalty_value, LevelsConfig, PenaltyConfig};
use plse::prox::{iso_prox, iso_prox_mcp, prox_univariate, sorted_prox};
use plse::simulation::{run_experiment, Design, ScenarioSpec, SignalGroup};
use plse::solver::{concave_part_gradient, fit_lca, lca_step, Problem, Schedule, SolverConfig};
use plse::{FamilyKind, PenaltyFamily, PenaltySpec, SpikeSlabParams};
use rand::Rng;

fn report(id: u32, pass: bool, detail: String) -> bool {
    let line = format!("acceptance criterion {id}: {} ({detail})\n", if pass { "PASS" } else { "FAIL" });
    // bypass the test harness capture so the lines always reach the log
    let _ = std::io::stderr().write_all(line.as_bytes());
    pass
}

const KINDS: [FamilyKind; 4] = [FamilyKind::L1, FamilyKind::Mcp, FamilyKind::Scad, FamilyKind::SpikeSlab];

fn random_family(r: &mut impl Rng, kind: FamilyKind) -> (PenaltyFamily, RefFamily) {
    match kind {
        FamilyKind::L1 => (PenaltyFamily::l1(), RefFamily::L1),
        FamilyKind::Mcp => {
            let k = r.random_range(0.05..2.0);
            (PenaltyFamily::mcp(k).unwrap(), RefFamily::Mcp { kappa: k })
        }
        FamilyKind::Scad => {
            let k = r.random_range(0.05..2.0);
            (PenaltyFamily::scad(k).unwrap(), RefFamily::Scad { kappa: k })
        }
        FamilyKind::SpikeSlab => {
            let hi = r.random_range(0.5..3.0);
            let lo = r.random_range(0.05..hi);
            let rn = r.random_range(0.2..3.0);
            let w = r.random_range(0.05..0.95);
            let params = SpikeSlabParams {
                lambda_hi: hi,
                lambda_lo: lo,
                r_n: rn,
                weight_hi: w,
            };
            (PenaltyFamily::spike_slab(params).unwrap(), RefFamily::SpikeSlab { hi, lo, r: rn, w })
        }
    }
}

fn criterion_1() -> bool {
    let start = Instant::now();
    let mut r = rng(1);
    let mut worst = 0.0_f64;
    for kind in KINDS {
        for _ in 0..1000 {
            let (fam, rf) = random_family(&mut r, kind);
            let x = r.random_range(-6.0..6.0);
            let lambda = r.random_range(0.05..2.0);
            let t = r.random_range(0.05..2.0);
            let kappa = fam.kappa_bar();
            let got = prox_univariate(x, &fam, lambda, t, kappa).unwrap();
            let f = |b: f64| 0.5 * (b - x) * (b - x) + t * (rf.value(b, lambda) + 0.5 * kappa * b * b);
            let want = grid_argmin(f, -x.abs() - 1.0, x.abs() + 1.0);
            worst = worst.max((got - want).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    report(1, worst <= 1e-4 && secs < 10.0, format!("max |prox - grid| = {worst:.2e}, {secs:.2} s"))
}

fn criterion_2() -> bool {
    let start = Instant::now();
    let mut r = rng(2);
    let mut worst = 0.0_f64;
    for p in 2..=5 {
        for kind in KINDS {
            for _ in 0..200 {
                let (fam, rf) = random_family(&mut r, kind);
                let x: Vec<f64> = (0..p).map(|_| r.random_range(-4.0..4.0)).collect();
                let levels = random_levels(&mut r, p, 2.0);
                let step = r.random_range(0.2..1.5);
                let kappa = fam.kappa_bar();
                let spec = PenaltySpec::new(fam, levels.clone(), 0.0).unwrap();
                let got = sorted_prox(&x, &spec, step, kappa).unwrap();
                let want = brute_sorted_prox(&x, &levels, rf, step, kappa);
                for (g, w) in got.iter().zip(&want) {
                    worst = worst.max((g - w).abs());
                }
            }
        }
    }
    let mut block_gap = 0.0_f64;
    for _ in 0..500 {
        let p = r.random_range(1..40);
        let mut x: Vec<f64> = (0..p).map(|_| r.random_range(0.0..5.0)).collect();
        x.sort_by(|a, b| b.total_cmp(a));
        let levels = random_levels(&mut r, p, 2.5);
        let kb = r.random_range(0.05..2.0);
        let step = r.random_range(0.2..1.5);
        let a = iso_prox_mcp(&x, &levels, step, kb).unwrap();
        let b = iso_prox(&x, &levels, &PenaltyFamily::mcp(kb).unwrap(), step, kb).unwrap();
        for (u, v) in a.iter().zip(&b) {
            block_gap = block_gap.max((u - v).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        2,
        worst <= 1e-4 && block_gap <= 1e-8 && secs < 60.0,
        format!("max |sorted_prox - brute| = {worst:.2e}, max |mcp block - generic| = {block_gap:.2e}, {secs:.2} s"),
    )
}

fn criterion_3() -> bool {
    let mut r = rng(3);
    let mut sign_ok = true;
    let mut order_ok = true;
    let mut identity = 0.0_f64;
    for i in 0..10_000 {
        let kind = KINDS[i % 4];
        let (fam, _) = random_family(&mut r, kind);
        let p = r.random_range(1..16);
        let mut x: Vec<f64> = (0..p).map(|_| r.random_range(-5.0..5.0)).collect();
        if p > 2 && i % 3 == 0 {
            x[1] = -x[0];
            x[p - 1] = 0.0;
        }
        let levels = random_levels(&mut r, p, 2.0);
        let step = r.random_range(0.2..1.5);
        let kappa = fam.kappa_bar();
        let spec = PenaltySpec::new(fam, levels.clone(), 0.0).unwrap();
        let b = sorted_prox(&x, &spec, step, kappa).unwrap();
        for j in 0..p {
            if b[j] * x[j] < 0.0 || (x[j] == 0.0 && b[j] != 0.0) {
                sign_ok = false;
            }
            for k in 0..p {
                if x[j].abs() > x[k].abs() && b[j].abs() < b[k].abs() {
                    order_ok = false;
                }
            }
        }
        let mut lhs: Vec<f64> = b.iter().map(|v| v.abs()).collect();
        lhs.sort_by(|a, b| b.total_cmp(a));
        let mut xs: Vec<f64> = x.iter().map(|v| v.abs()).collect();
        xs.sort_by(|a, b| b.total_cmp(a));
        let rhs = iso_prox(&xs, &levels, &fam, step, kappa).unwrap();
        for (u, v) in lhs.iter().zip(&rhs) {
            identity = identity.max((u - v).abs());
        }
    }
    report(
        3,
        sign_ok && order_ok && identity <= 1e-10,
        format!("sign preserved: {sign_ok}, order preserved: {order_ok}, max identity gap = {identity:.2e}"),
    )
}

fn criterion_4() -> bool {
    let start = Instant::now();
    let mut r = rng(4);
    let mut worst = 0.0_f64;
    for kind in KINDS {
        for i in 0..100 {
            let p = 1 + i % 6;
            let (fam, rf) = random_family(&mut r, kind);
            let b: Vec<f64> = (0..p).map(|_| r.random_range(-5.0..5.0)).collect();
            let levels = random_levels(&mut r, p, 2.0);
            let got = sorted_penalty_value(&b, &PenaltySpec::new(fam, levels.clone(), 0.0).unwrap()).unwrap();
            let want = permutations(p)
                .iter()
                .map(|k| (0..p).map(|j| rf.value(b[j], levels[k[j]])).sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max);
            worst = worst.max((got - want).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    report(4, worst <= 1e-12 && secs < 30.0, format!("max gap = {worst:.2e}, {secs:.2} s"))
}

fn random_problem(r: &mut impl Rng, n: usize, p: usize) -> Problem {
    let x = random_design(r, n, p);
    let s = p.min(5);
    let mut beta = DVector::zeros(p);
    for j in 0..s {
        beta[j] = r.random_range(-3.0..3.0);
    }
    let noise = DVector::from_fn(n, |_, _| r.random_range(-1.0..1.0));
    let y = &x * &beta + noise;
    Problem::new(x, y).unwrap()
}

fn random_spec(r: &mut impl Rng, kind: FamilyKind, p: usize, n: usize) -> PenaltySpec {
    let (fam, _) = random_family(r, kind);
    let base = (2.0 * (p as f64).ln() / n as f64).sqrt();
    let levels = if r.random_bool(0.5) {
        vec![base * r.random_range(0.3..1.5); p]
    } else {
        let mut v = random_levels(r, p, 1.5 * base);
        v[0] = v[0].max(0.2 * base);
        v
    };
    PenaltySpec::new(fam, levels, 0.0).unwrap()
}

fn criterion_5() -> bool {
    let start = Instant::now();
    let mut r = rng(5);
    let mut worst = f64::NEG_INFINITY;
    let mut steps = 0usize;
    let config = SolverConfig {
        schedule: Schedule::None,
        outer_max_iters: 25,
        inner_tol: 1e-9,
        ..SolverConfig::default()
    };
    for i in 0..100 {
        let n = r.random_range(20..=100);
        let p = r.random_range(5..=200);
        let pb = random_problem(&mut r, n, p);
        let spec = random_spec(&mut r, KINDS[i % 4], p, n);
        let fit = fit_lca(&pb, &spec, &config, None).unwrap();
        for w in fit.objective_trace.windows(2) {
            let rise = (w[1] - w[0]) / w[0].abs().max(f64::MIN_POSITIVE);
            worst = worst.max(rise);
            steps += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        5,
        worst <= 1e-10 && secs < 120.0,
        format!("{steps} outer steps, max relative rise = {worst:.2e}, {secs:.2} s"),
    )
}

fn criterion_6() -> bool {
    let mut r = rng(6);
    let mut worst = 0.0_f64;
    let config = SolverConfig {
        inner_tol: 1e-11,
        outer_tol: 1e-11,
        ..SolverConfig::default()
    };
    for i in 0..20 {
        let (n, p) = if i % 2 == 0 { (60, 30) } else { (50, 120) };
        let pb = random_problem(&mut r, n, p);
        let lambda = pb.max_abs_correlation_at_zero() * r.random_range(0.1..0.6);
        let spec = PenaltySpec::constant(PenaltyFamily::mcp(0.0).unwrap(), lambda, p).unwrap();
        let fit = fit_lca(&pb, &spec, &config, None).unwrap();
        let want = cd_lasso(pb.x(), pb.y(), lambda);
        worst = worst.max((fit.beta() - want).amax());
    }
    let mut zero_exact = true;
    for i in 0..20 {
        let pb = random_problem(&mut r, 40, 10 + 10 * i);
        let lambda = pb.max_abs_correlation_at_zero() * (1.0 + 0.1 * (i % 3) as f64);
        let spec = PenaltySpec::constant(PenaltyFamily::mcp(0.0).unwrap(), lambda, pb.p()).unwrap();
        let fit = fit_lca(&pb, &spec, &SolverConfig::default(), None).unwrap();
        if fit.beta_hat.iter().any(|v| *v != 0.0) {
            zero_exact = false;
        }
    }
    report(
        6,
        worst <= 1e-5 && zero_exact,
        format!("max |lca - cd lasso| = {worst:.2e}, zero solution exact: {zero_exact}"),
    )
}

fn criterion_7() -> bool {
    let start = Instant::now();
    let (lambda, kappa, b_old) = (1.0, 1.0 / 3.0, 1.5);
    let f1 = figure1_rows(lambda, kappa, b_old).unwrap();
    let mcp = |b: f64| {
        let a = b.abs();
        if a <= lambda / kappa {
            lambda * a - kappa * a * a / 2.0
        } else {
            lambda * lambda / (2.0 * kappa)
        }
    };
    let at = f1.iter().find(|row| (row[0] - b_old).abs() < 1e-9).unwrap();
    let tangency = (at[3] - mcp(b_old)).abs();
    let majorizes = f1.iter().all(|row| row[3] >= row[1] - 1e-12 && row[3] >= row[2] - 1e-12);
    let f2 = figure2_rows(lambda, kappa).unwrap();
    let closed = f2
        .iter()
        .map(|row| {
            let x: f64 = row[0];
            let want = x.signum() * (x.abs() - lambda).max(0.0).min(x.abs() / (1.0 + kappa));
            (row[6] - want).abs()
        })
        .fold(0.0_f64, f64::max);
    let secs = start.elapsed().as_secs_f64();
    report(
        7,
        tangency <= 1e-12 && majorizes && closed <= 1e-12 && secs < 5.0 && f1.len() == 801 && f2.len() == 1201,
        format!("tangency gap = {tangency:.2e}, majorization on grid: {majorizes}, max closed-form gap = {closed:.2e}, {secs:.2} s"),
    )
}

/// Sorted-MCP settings for the strong-signal scenario.
const STRONG_A0: f64 = 1.2;
const STRONG_ALPHA: f64 = 0.5;
const STRONG_KAPPA: f64 = 0.5;

fn criterion_8() -> bool {
    let start = Instant::now();
    let scenario = ScenarioSpec {
        n: 200,
        p: 500,
        s: 10,
        design: Design::IidGaussian,
        signal: vec![SignalGroup {
            count: 10,
            amplitude: 10.0,
        }],
        sigma: 1.0,
        seed: 20_160_901,
        replications: 20,
        randomize_support: false,
    };
    let penalties = vec![
        PenaltyConfig {
            name: Some("sorted_mcp".into()),
            family: FamilyKind::Mcp,
            kappa_bar: STRONG_KAPPA,
            levels: LevelsConfig::Sorted {
                a0: STRONG_A0,
                alpha: STRONG_ALPHA,
                sigma: 1.0,
            },
            spike_slab: None,
            l1_blend_weight: 0.0,
        },
        PenaltyConfig {
            name: Some("lasso".into()),
            family: FamilyKind::L1,
            kappa_bar: 0.0,
            levels: LevelsConfig::Universal { sigma: 1.0, eta: 1.0 },
            spike_slab: None,
            l1_blend_weight: 0.0,
        },
    ];
    let rep = run_experiment(&scenario, &penalties, &SolverConfig::default()).unwrap();
    let smcp = rep.summary_for("sorted_mcp", "truth", "l2").unwrap().median;
    let lasso = rep.summary_for("lasso", "truth", "l2").unwrap().median;
    let equal = rep
        .cells
        .iter()
        .filter(|c| c.penalty == "sorted_mcp")
        .filter(|c| c.vs_oracle.as_ref().is_some_and(|m| m.linf <= 1e-3))
        .count();
    let secs = start.elapsed().as_secs_f64();
    report(
        8,
        smcp <= lasso && equal * 2 >= scenario.replications && secs < 180.0,
        format!(
            "median l2: sorted mcp {smcp:.4}, lasso {lasso:.4}; oracle match in {equal}/{} replications, {secs:.1} s",
            scenario.replications
        ),
    )
}

fn criterion_9() -> bool {
    let mut r = rng(9);
    let tau = 1e-8;
    let config = SolverConfig {
        inner_tol: tau,
        ..SolverConfig::default()
    };
    let mut worst = 0.0_f64;
    let mut all_converged = true;
    for i in 0..50 {
        let n = r.random_range(20..=80);
        let p = r.random_range(5..=150);
        let pb = random_problem(&mut r, n, p);
        let spec = random_spec(&mut r, KINDS[i % 4], p, n);
        let b_old = DVector::from_fn(p, |_, _| if r.random_bool(0.2) { r.random_range(-2.0..2.0) } else { 0.0 });
        let (b, inner) = lca_step(&pb, &b_old, &spec, &config).unwrap();
        let tilt = concave_part_gradient(&spec, &b_old);
        let kkt = kkt_residual_convexified(&pb, b.as_slice(), &spec, spec.family().kappa_bar(), tilt.as_slice()).unwrap();
        all_converged &= inner.converged;
        worst = worst.max(kkt.inf_norm);
    }

    // zero residual against the explicit MCP conditions on one-coordinate problems x = [1],
    // where the correlation equals y − b.
    let mut agree = 0;
    let total = 1000;
    let zero_tol = 1e-10;
    for i in 0..total {
        let lambda = r.random_range(0.2..2.0);
        let kappa_star = if i % 2 == 0 { 0.0 } else { r.random_range(0.1..1.5) };
        let b = if r.random_bool(0.3) { 0.0 } else { r.random_range(-3.0..3.0) };
        let g = if b == 0.0 {
            r.random_range(-1.5 * lambda..1.5 * lambda)
        } else if r.random_bool(0.5) {
            let k = if kappa_star == 0.0 { 0.0 } else { r.random_range(0.0..kappa_star) };
            f64::signum(b) * (lambda - k * b.abs()).max(0.0)
        } else {
            r.random_range(-0.5 * lambda..1.5 * lambda)
        };
        let pb = Problem::new(DMatrix::from_element(1, 1, 1.0), DVector::from_element(1, b + g)).unwrap();
        let explicit = check_explicit_conditions(&pb, &[b], lambda, kappa_star, zero_tol).unwrap()[0];
        // residual zero for some MCP member with concavity at most kappa_star
        let s = f64::signum(b) * (pb.y()[0] - b);
        let kappa_j = if b == 0.0 {
            kappa_star
        } else {
            ((lambda - s.max(0.0)) / b.abs()).max(0.0)
        };
        let solvable = kappa_j <= kappa_star + zero_tol && {
            let spec = PenaltySpec::constant(PenaltyFamily::mcp(kappa_j).unwrap(), lambda, 1).unwrap();
            kkt_residual(&pb, &[b], &spec).unwrap().inf_norm <= zero_tol
        };
        if explicit == solvable {
            agree += 1;
        }
    }
    report(
        9,
        worst <= tau && all_converged && agree == total,
        format!("max convexified residual = {worst:.2e} (tol {tau:.0e}), residual/explicit-condition agreement {agree}/{total}"),
    )
}

#[test]
fn acceptance_criteria() {
    let results = [
        criterion_1(),
        criterion_2(),
        criterion_3(),
        criterion_4(),
        criterion_5(),
        criterion_6(),
        criterion_7(),
        criterion_8(),
        criterion_9(),
    ];
    let failed: Vec<usize> = results
        .iter()
        .enumerate()
        .filter(|(_, ok)| !**ok)
        .map(|(i, _)| i + 1)
        .collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
