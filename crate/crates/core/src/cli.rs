//! Command-line front end for fitting, prox evaluation, simulation and
//! figure data.
//!
//! Exit codes: 0 success, 1 input error, 2 iteration cap reached.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::diagnostics::{kkt_residual, KktReport};
use crate::error::{PlseError, Result};
use crate::fmt_f64;
use crate::penalty::{PenaltyConfig, PenaltyFamily};
use crate::prox::{prox_univariate, sorted_prox};
use crate::simulation::{run_experiment, ScenarioSpec};
use crate::solver::{fit_lca, FitResult, Problem, SolverConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "plse", version, about = "Sorted concave penalized least squares")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a penalized regression from CSV data.
    Fit {
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        y: PathBuf,
        #[arg(long)]
        penalty: PathBuf,
        #[arg(long)]
        solver: Option<PathBuf>,
        /// Defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: OutputFormat,
        /// Skip one header row in each CSV input.
        #[arg(long)]
        header: bool,
    },
    /// Evaluate the sorted proximal map of a vector.
    Prox {
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        penalty: PathBuf,
        #[arg(long)]
        step: f64,
        /// Sample size used to resolve sorted or universal levels (default: length of x).
        #[arg(long)]
        n: Option<usize>,
        /// Convexification constant (default: the family's concavity).
        #[arg(long)]
        kappa: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        header: bool,
    },
    /// Run a Monte-Carlo experiment.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// JSON array of penalty objects.
        #[arg(long)]
        penalties: PathBuf,
        #[arg(long)]
        solver: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the long-format CSV report here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Emit curve data for the MCP approximation figures.
    Figure {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
        which: u8,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, default_value_t = 1.0 / 3.0)]
        kappa: f64,
        #[arg(long = "b-old", default_value_t = 1.5)]
        b_old: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Output of `fit`: the fit plus its KKT report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOutput {
    #[serde(flatten)]
    pub fit: FitResult,
    pub kkt: KktReport,
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| PlseError::Io(format!("{}: {e}", path.display())))
}

fn with_path<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        PlseError::Parse(m) => PlseError::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Reads a numeric CSV into rows.
pub fn read_csv_rows(path: &Path, header: bool) -> Result<Vec<Vec<f64>>> {
    let text = read_text(path)?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(header)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| PlseError::Parse(format!("{}: {e}", path.display())))?;
        let row = rec
            .iter()
            .enumerate()
            .map(|(j, f)| {
                f.parse::<f64>().map_err(|_| {
                    PlseError::Parse(format!("{}: row {}, column {}: `{f}` is not a number", path.display(), i + 1, j + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_matrix(path: &Path, header: bool) -> Result<DMatrix<f64>> {
    let rows = read_csv_rows(path, header)?;
    let n = rows.len();
    if n == 0 {
        return Err(PlseError::Parse(format!("{}: no data rows", path.display())));
    }
    let p = rows[0].len();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(DMatrix::from_row_slice(n, p, &flat))
}

/// Reads a vector stored either as one column or as one row.
pub fn read_vector(path: &Path, header: bool) -> Result<Vec<f64>> {
    let rows = read_csv_rows(path, header)?;
    match rows.as_slice() {
        [] => Ok(Vec::new()),
        [single] => Ok(single.clone()),
        _ if rows.iter().all(|r| r.len() == 1) => Ok(rows.into_iter().map(|r| r[0]).collect()),
        _ => Err(PlseError::Parse(format!("{}: expected a single column", path.display()))),
    }
}

fn solver_config(path: Option<&PathBuf>) -> Result<SolverConfig> {
    match path {
        Some(p) => with_path(p, SolverConfig::from_json(&read_text(p)?)),
        None => Ok(SolverConfig::default()),
    }
}

fn penalty_config(path: &Path) -> Result<PenaltyConfig> {
    with_path(path, PenaltyConfig::from_json(&read_text(path)?))
}

fn emit(out: Option<&PathBuf>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => fs::write(p, bytes).map_err(|e| PlseError::Io(format!("{}: {e}", p.display()))),
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(bytes)?;
            Ok(())
        }
    }
}

fn column_csv(values: &[f64]) -> String {
    let mut s = String::new();
    for v in values {
        s.push_str(&fmt_f64(*v));
        s.push('\n');
    }
    s
}

/// Writes a header plus rows using shortest round-trip formatting.
pub fn table_csv(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        let cells: Vec<String> = r.iter().map(|v| fmt_f64(*v)).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

pub fn fit_from_files(
    x: &Path,
    y: &Path,
    penalty: &Path,
    solver: Option<&PathBuf>,
    header: bool,
) -> Result<FitOutput> {
    let xm = read_matrix(x, header)?;
    let yv = read_vector(y, header)?;
    let problem = Problem::unchecked(xm, DVector::from_vec(yv))?;
    let pen = penalty_config(penalty)?.resolve(problem.n(), problem.p())?;
    let config = solver_config(solver)?;
    let fit = fit_lca(&problem, &pen, &config, None)?;
    let kkt = kkt_residual(&problem, &fit.beta_hat, &pen)?;
    Ok(FitOutput { fit, kkt })
}

/// Curves for the LCA/LLA comparison at `b_old`.
pub fn figure1_rows(lambda: f64, kappa: f64, b_old: f64) -> Result<Vec<Vec<f64>>> {
    let fam = PenaltyFamily::mcp(kappa)?;
    let rho_old = fam.value(b_old, lambda);
    let slope_old = fam.derivative_abs(b_old.abs(), lambda);
    let grad_minus = kappa * b_old;
    let plus = |b: f64| fam.value(b, lambda) + 0.5 * kappa * b * b;
    let offset = plus(b_old) - b_old * grad_minus - rho_old;
    Ok(grid(-4.0, 4.0)
        .map(|b| {
            let lla = rho_old + slope_old * (b.abs() - b_old.abs());
            let lca = plus(b) - b * grad_minus - offset;
            vec![b, fam.value(b, lambda), lla, lca]
        })
        .collect())
}

pub const FIGURE1_HEADER: [&str; 4] = ["b", "rho", "lla", "lca"];
pub const FIGURE2_HEADER: [&str; 7] = ["x", "pen_l1", "pen_mcp", "pen_lca", "prox_l1", "prox_mcp", "prox_lca"];

/// MCP prox at unit step (`κ̄ < 1`).
pub fn firm_threshold(x: f64, lambda: f64, kappa: f64) -> f64 {
    let a = x.abs();
    let m = if a <= lambda {
        0.0
    } else if a * kappa <= lambda {
        (a - lambda) / (1.0 - kappa)
    } else {
        a
    };
    m.copysign(x) + 0.0
}

/// Penalties and unit-step prox maps of the Lasso, MCP and convexified MCP.
pub fn figure2_rows(lambda: f64, kappa: f64) -> Result<Vec<Vec<f64>>> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(PlseError::param("kappa", "figure 2 needs 0 < kappa < 1"));
    }
    let mcp = PenaltyFamily::mcp(kappa)?;
    let l1 = PenaltyFamily::l1();
    grid(-6.0, 6.0)
        .map(|x| {
            Ok(vec![
                x,
                lambda * x.abs(),
                mcp.value(x, lambda),
                mcp.value(x, lambda) + 0.5 * kappa * x * x,
                prox_univariate(x, &l1, lambda, 1.0, 0.0)?,
                firm_threshold(x, lambda, kappa),
                prox_univariate(x, &mcp, lambda, 1.0, kappa)?,
            ])
        })
        .collect()
}

/// `lo, lo + 0.01, ..., hi` computed from integer steps.
pub fn grid(lo: f64, hi: f64) -> impl Iterator<Item = f64> {
    let n = ((hi - lo) * 100.0).round() as i64;
    (0..=n).map(move |k| {
        let v = (lo * 100.0 + k as f64) / 100.0;
        if v == 0.0 {
            0.0
        } else {
            v
        }
    })
}

/// Runs a parsed command and returns its exit code.
pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Fit {
            x,
            y,
            penalty,
            solver,
            out,
            format,
            header,
        } => {
            let res = fit_from_files(&x, &y, &penalty, solver.as_ref(), header)?;
            let bytes = match format {
                OutputFormat::Json => json_bytes(&res)?,
                OutputFormat::Csv => column_csv(&res.fit.beta_hat).into_bytes(),
            };
            emit(out.as_ref(), &bytes)?;
            Ok(if res.fit.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
        }
        Command::Prox {
            x,
            penalty,
            step,
            n,
            kappa,
            out,
            header,
        } => {
            let xv = read_vector(&x, header)?;
            let p = xv.len();
            if p == 0 {
                return Err(PlseError::Parse(format!("{}: empty vector", x.display())));
            }
            let spec = penalty_config(&penalty)?.resolve(n.unwrap_or(p), p)?;
            let kappa = kappa.unwrap_or_else(|| spec.family().kappa_bar());
            let b = sorted_prox(&xv, &spec, step, kappa)?;
            emit(out.as_ref(), column_csv(&b).as_bytes())?;
            Ok(EXIT_OK)
        }
        Command::Simulate {
            scenario,
            penalties,
            solver,
            out,
            csv,
        } => {
            let sc = with_path(&scenario, ScenarioSpec::from_json(&read_text(&scenario)?))?;
            let pens: Vec<PenaltyConfig> =
                with_path(&penalties, serde_json::from_str(&read_text(&penalties)?).map_err(PlseError::from))?;
            let config = solver_config(solver.as_ref())?;
            let report = run_experiment(&sc, &pens, &config)?;
            emit(out.as_ref(), &json_bytes(&report)?)?;
            if let Some(path) = csv {
                let f = fs::File::create(&path).map_err(|e| PlseError::Io(format!("{}: {e}", path.display())))?;
                report.write_csv(std::io::BufWriter::new(f))?;
            }
            let all_ok = report.cells.iter().all(|c| c.converged && c.error.is_none());
            Ok(if all_ok { EXIT_OK } else { EXIT_NOT_CONVERGED })
        }
        Command::Figure {
            which,
            lambda,
            kappa,
            b_old,
            out,
        } => {
            let text = if which == 1 {
                table_csv(&FIGURE1_HEADER, &figure1_rows(lambda, kappa, b_old)?)
            } else {
                table_csv(&FIGURE2_HEADER, &figure2_rows(lambda, kappa)?)
            };
            emit(out.as_ref(), text.as_bytes())?;
            Ok(EXIT_OK)
        }
    }
}
