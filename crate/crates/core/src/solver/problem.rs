use nalgebra::{DMatrix, DVector};

use crate::error::{PlseError, Result};

/// Relative tolerance on `‖x_j‖₂² = n` for column-normalized designs.
pub const COLUMN_NORM_RTOL: f64 = 1e-8;

/// Linear model data: design `X` (n × p) and response `y`.
///
/// Matrix-vector products go through nalgebra's sequential kernels, so a
/// given input always reduces in the same (column) order.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    x: DMatrix<f64>,
    y: DVector<f64>,
    column_norms_checked: bool,
}

impl Problem {
    /// Requires `‖x_j‖₂² = n` for every column.
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        let mut pb = Self::unchecked(x, y)?;
        let n = pb.n() as f64;
        for (j, col) in pb.x.column_iter().enumerate() {
            let sq = col.norm_squared();
            if (sq - n).abs() > COLUMN_NORM_RTOL * n {
                return Err(PlseError::param(
                    format!("X[:, {j}]"),
                    format!("squared column norm {sq} differs from n = {n}"),
                ));
            }
        }
        pb.column_norms_checked = true;
        Ok(pb)
    }

    /// Only checks that dimensions agree.
    pub fn unchecked(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(PlseError::DimensionMismatch {
                what: "response length",
                expected: x.nrows(),
                got: y.len(),
            });
        }
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(PlseError::domain("design matrix must be non-empty"));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(PlseError::domain("design and response must be finite"));
        }
        Ok(Problem {
            x,
            y,
            column_norms_checked: false,
        })
    }

    /// Rescales every nonzero column to `‖x_j‖₂² = n`.
    pub fn normalize_columns(x: &mut DMatrix<f64>) {
        let n = x.nrows() as f64;
        for mut col in x.column_iter_mut() {
            let norm = col.norm();
            if norm > 0.0 {
                col *= n.sqrt() / norm;
            }
        }
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn column_norms_checked(&self) -> bool {
        self.column_norms_checked
    }

    /// `y − Xb`.
    pub fn residual(&self, b: &DVector<f64>) -> DVector<f64> {
        &self.y - &self.x * b
    }

    /// `‖y − Xb‖₂²/(2n)`.
    pub fn loss(&self, b: &DVector<f64>) -> f64 {
        self.residual(b).norm_squared() / (2.0 * self.n() as f64)
    }

    /// `Xᵀ(y − Xb)/n`, the negative loss gradient.
    pub fn correlation(&self, b: &DVector<f64>) -> DVector<f64> {
        self.correlation_of_residual(&self.residual(b))
    }

    pub(crate) fn correlation_of_residual(&self, r: &DVector<f64>) -> DVector<f64> {
        self.x.tr_mul(r) / self.n() as f64
    }

    /// `‖Xᵀy/n‖_∞`, the smallest ℓ1 level with zero solution.
    pub fn max_abs_correlation_at_zero(&self) -> f64 {
        self.correlation_of_residual(&self.y).amax()
    }

    /// Largest diagonal entry of `XᵀX/n`, a lower bound on the Lipschitz
    /// constant of the loss gradient.
    pub fn max_gram_diagonal(&self) -> f64 {
        let n = self.n() as f64;
        self.x
            .column_iter()
            .map(|c| c.norm_squared() / n)
            .fold(0.0, f64::max)
    }

    /// Power iteration for the top eigenvalue of `XᵀX/n`.
    pub fn gram_top_eigenvalue(&self, iters: usize) -> f64 {
        let n = self.n() as f64;
        let mut v = DVector::from_element(self.p(), 1.0 / (self.p() as f64).sqrt());
        let mut est = self.max_gram_diagonal();
        for _ in 0..iters {
            let w = self.x.tr_mul(&(&self.x * &v)) / n;
            let norm = w.norm();
            if norm == 0.0 {
                return est;
            }
            est = v.dot(&w);
            v = w / norm;
        }
        let w = self.x.tr_mul(&(&self.x * &v)) / n;
        est.max(v.dot(&w))
    }
}

/// `∇L(b) = −Xᵀ(y − Xb)/n`.
pub fn loss_gradient(problem: &Problem, b: &DVector<f64>) -> Result<DVector<f64>> {
    if b.len() != problem.p() {
        return Err(PlseError::DimensionMismatch {
            what: "coefficient vector",
            expected: problem.p(),
            got: b.len(),
        });
    }
    Ok(-problem.correlation(b))
}
