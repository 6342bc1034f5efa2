//! Synthetic sparse regression problems and a Monte-Carlo harness.
//!
//! Replication `r` of a scenario with seed `s` draws from
//! `ChaCha20Rng::seed_from_u64(s)` on stream `r`, so replications are
//! independent of each other and of the order they run in.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{error_metrics, ErrorMetrics};
use crate::error::{PlseError, Result};
use crate::penalty::{universal_lambda, PenaltyConfig};
use crate::solver::{fit_lca, oracle_lse, Problem, SolverConfig};

/// Environment variable capping the number of worker threads (0 = auto).
pub const THREADS_ENV: &str = "PLSE_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Design {
    IidGaussian,
    /// Rows are stationary AR(1) sequences with unit marginal variance.
    Ar1 { rho: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalGroup {
    pub count: usize,
    /// Magnitude as a multiple of `λ_* = σ√((2/n) log p)`.
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub n: usize,
    pub p: usize,
    pub s: usize,
    pub design: Design,
    pub signal: Vec<SignalGroup>,
    pub sigma: f64,
    pub seed: u64,
    pub replications: usize,
    /// Draw the support uniformly instead of using the leading coordinates.
    #[serde(default)]
    pub randomize_support: bool,
}

impl ScenarioSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ScenarioSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(PlseError::param("n", "must be at least 2"));
        }
        if self.p < 2 {
            return Err(PlseError::param("p", "must be at least 2"));
        }
        let total: usize = self.signal.iter().map(|g| g.count).sum();
        if total != self.s {
            return Err(PlseError::param("signal", format!("counts sum to {total}, expected s = {}", self.s)));
        }
        if self.s > self.p {
            return Err(PlseError::param("s", "must not exceed p"));
        }
        if self.signal.iter().any(|g| !g.amplitude.is_finite()) {
            return Err(PlseError::param("signal.amplitude", "must be finite"));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(PlseError::param("sigma", "must be nonnegative"));
        }
        if let Design::Ar1 { rho } = self.design {
            if !(rho > -1.0 && rho < 1.0) {
                return Err(PlseError::param("design.rho", "must lie in (-1, 1)"));
            }
        }
        if self.replications == 0 {
            return Err(PlseError::param("replications", "must be at least 1"));
        }
        Ok(())
    }

    /// Unit of signal amplitude. With `sigma = 0` the level is taken at unit noise.
    pub fn lambda_star(&self) -> f64 {
        let sigma = if self.sigma > 0.0 { self.sigma } else { 1.0 };
        universal_lambda(sigma, self.n, self.p, 1.0).expect("validated scenario")
    }
}

pub struct GeneratedProblem {
    pub problem: Problem,
    pub beta_star: DVector<f64>,
    pub support: Vec<usize>,
}

fn replication_rng(seed: u64, replication: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(replication as u64);
    rng
}

/// Draws replication `replication` of the scenario.
pub fn generate_problem(spec: &ScenarioSpec, replication: usize) -> Result<GeneratedProblem> {
    spec.validate()?;
    let (n, p) = (spec.n, spec.p);
    let mut rng = replication_rng(spec.seed, replication);
    let mut z = || -> f64 { StandardNormal.sample(&mut rng) };

    let mut x = DMatrix::zeros(n, p);
    match spec.design {
        Design::IidGaussian => {
            for i in 0..n {
                for j in 0..p {
                    x[(i, j)] = z();
                }
            }
        }
        Design::Ar1 { rho } => {
            let innov = (1.0 - rho * rho).sqrt();
            for i in 0..n {
                let mut prev = z();
                x[(i, 0)] = prev;
                for j in 1..p {
                    prev = rho * prev + innov * z();
                    x[(i, j)] = prev;
                }
            }
        }
    }
    Problem::normalize_columns(&mut x);

    let mut support: Vec<usize> = if spec.randomize_support {
        let mut idx = sample(&mut rng, p, spec.s).into_vec();
        idx.sort_unstable();
        idx
    } else {
        (0..spec.s).collect()
    };
    support.shrink_to_fit();

    let unit = spec.lambda_star();
    let mut beta = DVector::zeros(p);
    let amplitudes = spec
        .signal
        .iter()
        .flat_map(|g| std::iter::repeat_n(g.amplitude, g.count));
    for (k, (&j, a)) in support.iter().zip(amplitudes).enumerate() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        beta[j] = sign * a * unit;
    }

    let mut y = &x * &beta;
    if spec.sigma > 0.0 {
        let mut rng = replication_rng(spec.seed, replication);
        // skip past the design draws by using a separate word position
        rng.set_word_pos(1u128 << 64);
        for v in y.iter_mut() {
            let e: f64 = StandardNormal.sample(&mut rng);
            *v += spec.sigma * e;
        }
    }
    let problem = Problem::new(x, y)?;
    Ok(GeneratedProblem {
        problem,
        beta_star: beta,
        support,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub replication: usize,
    pub penalty: String,
    pub converged: bool,
    pub outer_iterations: usize,
    pub kkt_inf: f64,
    pub vs_truth: Option<ErrorMetrics>,
    pub vs_oracle: Option<ErrorMetrics>,
    /// Solver or oracle failure for this cell.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub penalty: String,
    pub reference: String,
    pub metric: String,
    pub count: usize,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub scenario: ScenarioSpec,
    pub penalties: Vec<String>,
    pub cells: Vec<CellResult>,
    pub summary: Vec<MetricSummary>,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

fn metric_values(m: &ErrorMetrics) -> Vec<(&'static str, f64)> {
    let mut out = vec![
        ("prediction", m.prediction),
        ("l1", m.l1),
        ("l2", m.l2),
        ("linf", m.linf),
    ];
    if let Some(v) = m.sorted_l1 {
        out.push(("sorted_l1", v));
    }
    if let Some((_, v)) = m.lq {
        out.push(("lq", v));
    }
    let sr = &m.support_recovery;
    out.push(("true_positives", sr.true_positives as f64));
    out.push(("false_positives", sr.false_positives as f64));
    out.push(("sign_agreement", if sr.sign_agreement { 1.0 } else { 0.0 }));
    out
}

fn run_replication(
    spec: &ScenarioSpec,
    penalties: &[PenaltyConfig],
    labels: &[String],
    config: &SolverConfig,
    rep: usize,
) -> Result<Vec<CellResult>> {
    let g = generate_problem(spec, rep)?;
    let truth = g.beta_star.as_slice();
    let oracle = oracle_lse(&g.problem, &g.support);
    let mut cells = Vec::with_capacity(penalties.len());
    for (cfg, label) in penalties.iter().zip(labels) {
        let mut cell = CellResult {
            replication: rep,
            penalty: label.clone(),
            converged: false,
            outer_iterations: 0,
            kkt_inf: f64::NAN,
            vs_truth: None,
            vs_oracle: None,
            error: None,
        };
        let pen = cfg.resolve(spec.n, spec.p)?;
        match fit_lca(&g.problem, &pen, config, None) {
            Ok(fit) => {
                cell.converged = fit.converged;
                cell.outer_iterations = fit.iterations.outer;
                cell.kkt_inf = fit.kkt_residual_inf;
                let b = &fit.beta_hat;
                cell.vs_truth = Some(error_metrics(&g.problem, b, truth, &g.support, pen.levels(), None)?);
                match &oracle {
                    Ok(o) => {
                        cell.vs_oracle =
                            Some(error_metrics(&g.problem, b, o.as_slice(), &g.support, pen.levels(), None)?)
                    }
                    Err(e) => cell.error = Some(format!("oracle: {e}")),
                }
            }
            Err(e) => cell.error = Some(e.to_string()),
        }
        cells.push(cell);
    }
    Ok(cells)
}

fn thread_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0)
}

/// Fits every penalty on every replication and summarizes the errors.
pub fn run_experiment(
    spec: &ScenarioSpec,
    penalties: &[PenaltyConfig],
    config: &SolverConfig,
) -> Result<ExperimentReport> {
    spec.validate()?;
    config.validate()?;
    let labels: Vec<String> = penalties.iter().enumerate().map(|(i, c)| c.label(i)).collect();
    for cfg in penalties {
        cfg.resolve(spec.n, spec.p)?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count())
        .build()
        .map_err(|e| PlseError::domain(format!("thread pool: {e}")))?;
    let per_rep: Vec<Result<Vec<CellResult>>> = pool.install(|| {
        (0..spec.replications)
            .into_par_iter()
            .map(|rep| run_replication(spec, penalties, &labels, config, rep))
            .collect()
    });
    let mut cells = Vec::new();
    for r in per_rep {
        cells.extend(r?);
    }

    let mut summary = Vec::new();
    for label in &labels {
        for (reference, pick) in [
            ("truth", (|c: &CellResult| c.vs_truth.as_ref()) as fn(&CellResult) -> Option<&ErrorMetrics>),
            ("oracle", |c: &CellResult| c.vs_oracle.as_ref()),
        ] {
            let rows: Vec<Vec<(&str, f64)>> = cells
                .iter()
                .filter(|c| &c.penalty == label)
                .filter_map(pick)
                .map(metric_values)
                .collect();
            let Some(first) = rows.first() else { continue };
            for (k, (metric, _)) in first.iter().enumerate() {
                let mut vals: Vec<f64> = rows
                    .iter()
                    .filter_map(|r| r.get(k).filter(|(m, _)| m == metric).map(|(_, v)| *v))
                    .collect();
                vals.sort_by(f64::total_cmp);
                summary.push(MetricSummary {
                    penalty: label.clone(),
                    reference: reference.to_string(),
                    metric: metric.to_string(),
                    count: vals.len(),
                    q1: quantile_sorted(&vals, 0.25),
                    median: quantile_sorted(&vals, 0.5),
                    q3: quantile_sorted(&vals, 0.75),
                });
            }
        }
    }
    Ok(ExperimentReport {
        scenario: spec.clone(),
        penalties: labels,
        cells,
        summary,
    })
}

impl ExperimentReport {
    pub fn summary_for(&self, penalty: &str, reference: &str, metric: &str) -> Option<&MetricSummary> {
        self.summary
            .iter()
            .find(|s| s.penalty == penalty && s.reference == reference && s.metric == metric)
    }

    /// Long-format CSV: one row per replication, penalty, reference and metric.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        let io = |e: csv::Error| PlseError::Io(e.to_string());
        w.write_record(["replication", "penalty", "reference", "metric", "value"]).map_err(io)?;
        for c in &self.cells {
            let rep = c.replication.to_string();
            let fit_rows = [
                ("converged", if c.converged { 1.0 } else { 0.0 }),
                ("outer_iterations", c.outer_iterations as f64),
                ("kkt_inf", c.kkt_inf),
            ];
            for (metric, v) in fit_rows {
                w.write_record([rep.as_str(), &c.penalty, "fit", metric, &crate::fmt_f64(v)]).map_err(io)?;
            }
            for (reference, m) in [("truth", &c.vs_truth), ("oracle", &c.vs_oracle)] {
                if let Some(m) = m {
                    for (metric, v) in metric_values(m) {
                        w.write_record([rep.as_str(), &c.penalty, reference, metric, &crate::fmt_f64(v)])
                            .map_err(io)?;
                    }
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}
