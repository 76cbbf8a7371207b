//! Linear regression of the complement coordinates on the projected ones.
//!
//! Completes a projection's score: the complement block is modeled as a
//! multivariate Gaussian whose mean is linear in the projected coordinates
//! (intercept included) and whose residual covariance is either unrestricted
//! or diagonal. The reported log-likelihood and free-parameter count feed the
//! regression BIC term of the composite projection score.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Shape of the residual covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegressionStructure {
    /// Unrestricted symmetric positive-definite residual covariance.
    Full,
    /// Independent residual variances per complement coordinate.
    Diagonal,
}

impl std::fmt::Display for RegressionStructure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RegressionStructure::Full => "full",
            RegressionStructure::Diagonal => "diagonal",
        })
    }
}

/// Floor applied to residual variances so collinear data keeps a finite
/// log-likelihood.
pub const RESIDUAL_VARIANCE_FLOOR: f64 = 1e-12;

const LN_2PI: f64 = 1.8378770664093453;

/// Residual covariance of a fitted regression.
#[derive(Debug, Clone)]
pub enum ResidualCovariance {
    /// Dense `(p-d) x (p-d)` matrix.
    Full(DMatrix<f64>),
    /// Per-coordinate variances.
    Diagonal(DVector<f64>),
}

/// A fitted multivariate linear regression with Gaussian residuals.
#[derive(Debug, Clone)]
pub struct RegressionFit {
    coefficients: DMatrix<f64>,
    residual_cov: ResidualCovariance,
    loglik: f64,
    q_ybar: usize,
}

impl RegressionFit {
    /// Coefficient matrix, `(d+1) x (p-d)`: row 0 holds the intercepts,
    /// rows `1..=d` the slopes on the projected coordinates.
    pub fn coefficients(&self) -> &DMatrix<f64> {
        &self.coefficients
    }

    /// Estimated residual covariance.
    pub fn residual_cov(&self) -> &ResidualCovariance {
        &self.residual_cov
    }

    /// Gaussian log-likelihood of the complement block under the fit.
    pub fn loglik(&self) -> f64 {
        self.loglik
    }

    /// Number of free parameters of the regression model.
    pub fn free_parameters(&self) -> usize {
        self.q_ybar
    }

    /// Residual covariance structure the model was fitted under.
    pub fn structure(&self) -> RegressionStructure {
        match self.residual_cov {
            ResidualCovariance::Full(_) => RegressionStructure::Full,
            ResidualCovariance::Diagonal(_) => RegressionStructure::Diagonal,
        }
    }
}

/// Free-parameter count: `(p-d)(d+1)` regression coefficients plus the
/// residual covariance parameters of the chosen structure.
pub fn regression_parameter_count(d: usize, residual_dim: usize, structure: RegressionStructure) -> usize {
    let coef = residual_dim * (d + 1);
    match structure {
        RegressionStructure::Full => coef + residual_dim * (residual_dim + 1) / 2,
        RegressionStructure::Diagonal => coef + residual_dim,
    }
}

/// Solves the normal equations `g c = rhs` by Cholesky, retrying with a tiny
/// escalating diagonal shift when the design is numerically rank deficient.
fn solve_normal_equations(mut g: DMatrix<f64>, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let k = g.nrows();
    let mut shift = RESIDUAL_VARIANCE_FLOOR * (1.0 + g.trace() / k as f64);
    for attempt in 0..4 {
        if let Some(chol) = g.clone().cholesky() {
            return Ok(chol.solve(rhs));
        }
        if attempt == 3 {
            break;
        }
        for i in 0..k {
            g[(i, i)] += shift;
        }
        shift *= 1e3;
    }
    Err(Error::Infeasible("regressors are collinear beyond repair".into()))
}

/// Clamps the smallest eigenvalue of the residual covariance to the floor.
fn floor_residual_cov(mut s: DMatrix<f64>) -> DMatrix<f64> {
    let m = s.nrows();
    let min_eig = s.clone().symmetric_eigen().eigenvalues.min();
    if min_eig < RESIDUAL_VARIANCE_FLOOR {
        let shift = RESIDUAL_VARIANCE_FLOOR - min_eig;
        for i in 0..m {
            s[(i, i)] += shift;
        }
    }
    s
}

/// Fits the least-squares regression (with intercept) of `y_comp` on `y` and
/// the maximum-likelihood residual covariance (divide by `n`).
///
/// Requires `n > d + 1`; the full structure additionally requires
/// `n > p - d`, otherwise the residual covariance estimate is singular.
pub fn fit_regression(
    y: &DMatrix<f64>,
    y_comp: &DMatrix<f64>,
    structure: RegressionStructure,
) -> Result<RegressionFit> {
    let n = y.nrows();
    let d = y.ncols();
    let m = y_comp.ncols();
    if y_comp.nrows() != n {
        return Err(Error::ShapeMismatch {
            left_rows: n,
            left_cols: d,
            right_rows: y_comp.nrows(),
            right_cols: m,
        });
    }
    if m == 0 {
        return Err(Error::EmptyInput("complement block"));
    }
    if n <= d + 1 {
        return Err(Error::Infeasible(format!(
            "regression needs n > d + 1 (n={n}, d={d})"
        )));
    }
    if structure == RegressionStructure::Full && n <= m {
        return Err(Error::StructureInfeasible { n, residual_dim: m });
    }

    // Design matrix [1 | y].
    let mut design = DMatrix::zeros(n, d + 1);
    for i in 0..n {
        design[(i, 0)] = 1.0;
        for j in 0..d {
            design[(i, j + 1)] = y[(i, j)];
        }
    }
    let gram = design.transpose() * &design;
    let rhs = design.transpose() * y_comp;
    let coefficients = solve_normal_equations(gram, &rhs)?;
    let residuals = y_comp - &design * &coefficients;

    let q_ybar = regression_parameter_count(d, m, structure);
    let (residual_cov, loglik) = match structure {
        RegressionStructure::Full => {
            let s = floor_residual_cov(residuals.transpose() * &residuals / n as f64);
            let chol = s
                .clone()
                .cholesky()
                .ok_or_else(|| Error::Infeasible("residual covariance not positive definite".into()))?;
            let logdet: f64 = (0..m).map(|i| chol.l_dirty()[(i, i)].ln()).sum::<f64>() * 2.0;
            let mut quad = 0.0;
            for i in 0..n {
                let e = residuals.row(i).transpose();
                quad += e.dot(&chol.solve(&e));
            }
            let ll = -0.5 * (n as f64 * (m as f64 * LN_2PI + logdet) + quad);
            (ResidualCovariance::Full(s), ll)
        }
        RegressionStructure::Diagonal => {
            let mut vars = DVector::zeros(m);
            for j in 0..m {
                let ss: f64 = (0..n).map(|i| residuals[(i, j)] * residuals[(i, j)]).sum();
                vars[j] = (ss / n as f64).max(RESIDUAL_VARIANCE_FLOOR);
            }
            let mut ll = 0.0;
            for j in 0..m {
                let ss: f64 = (0..n).map(|i| residuals[(i, j)] * residuals[(i, j)]).sum();
                ll += -0.5 * (n as f64 * (LN_2PI + vars[j].ln()) + ss / vars[j]);
            }
            (ResidualCovariance::Diagonal(vars), ll)
        }
    };

    Ok(RegressionFit { coefficients, residual_cov, loglik, q_ybar })
}

/// Regression BIC term: `2 * loglik - q_ybar * ln(n)`. Larger is better.
pub fn bic_reg(fit: &RegressionFit, n: usize) -> f64 {
    2.0 * fit.loglik - fit.q_ybar as f64 * (n as f64).ln()
}

/// Composite projection score: sum of the mixture and regression BIC terms.
///
/// Non-finite inputs mark the projection as unscorable.
pub fn composite_bic(bic_gmm_value: f64, bic_reg_value: f64) -> Result<f64> {
    if !bic_gmm_value.is_finite() || !bic_reg_value.is_finite() {
        return Err(Error::NonFiniteScore { bic_gmm: bic_gmm_value, bic_reg: bic_reg_value });
    }
    Ok(bic_gmm_value + bic_reg_value)
}
