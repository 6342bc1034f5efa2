use nalgebra::{DMatrix, DVector};

use super::problem::Problem;
use crate::error::{PlseError, Result};

/// Least squares restricted to `support`, zero elsewhere.
pub fn oracle_lse(problem: &Problem, support: &[usize]) -> Result<DVector<f64>> {
    let p = problem.p();
    let mut out = DVector::zeros(p);
    if support.is_empty() {
        return Ok(out);
    }
    let mut sorted = support.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if let Some(&j) = sorted.iter().find(|&&j| j >= p) {
        return Err(PlseError::param("support", format!("index {j} out of range")));
    }
    let xs = DMatrix::from_columns(&sorted.iter().map(|&j| problem.x().column(j)).collect::<Vec<_>>());
    let gram = xs.tr_mul(&xs);
    let rhs = xs.tr_mul(problem.y());
    let chol = gram
        .cholesky()
        .ok_or_else(|| PlseError::Singular(format!("X_S is rank deficient (|S| = {})", sorted.len())))?;
    let coef = chol.solve(&rhs);
    if coef.iter().any(|v| !v.is_finite()) {
        return Err(PlseError::Singular("X_S is numerically rank deficient".into()));
    }
    for (k, &j) in sorted.iter().enumerate() {
        out[j] = coef[k];
    }
    Ok(out)
}
