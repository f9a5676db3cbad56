//! Ordinary least squares via Householder QR.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest admissible ratio of extreme singular values of the design.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Intercept first, then exposure, then covariates.
    pub coefficients: Vec<f64>,
    pub standard_errors: Vec<f64>,
    /// RSS / (n - p).
    pub residual_variance: f64,
    pub r_squared: f64,
    pub n: usize,
    pub p: usize,
}

impl FitResult {
    /// Coefficient of the second design column (the exposure, by convention).
    pub fn exposure_coefficient(&self) -> f64 {
        self.coefficients[1]
    }

    pub fn exposure_standard_error(&self) -> f64 {
        self.standard_errors[1]
    }
}

fn check_shape(x: &DMatrix<f64>, y: &[f64]) -> Result<(usize, usize)> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::Dimension(format!(
            "design has {n} rows but response has {}",
            y.len()
        )));
    }
    if p == 0 || n <= p {
        return Err(Error::InsufficientData { n, p });
    }
    Ok((n, p))
}

fn factor_and_solve(x: &DMatrix<f64>, y: &[f64]) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let p = x.ncols();
    let qr = x.clone().qr();
    let r = qr.r();

    let sv = r.singular_values();
    let ratio = sv.min() / sv.max();
    if ratio.is_nan() || ratio < RANK_TOLERANCE {
        return Err(Error::SingularDesign { ratio });
    }

    let mut qty = DVector::from_column_slice(y);
    qr.q_tr_mul(&mut qty);
    let beta = r
        .solve_upper_triangular(&qty.rows(0, p).into_owned())
        .ok_or(Error::SingularDesign { ratio })?;
    Ok((beta, r))
}

/// Least-squares coefficients for `n >= p`, allowing exact interpolation.
pub fn least_squares(x: &DMatrix<f64>, y: &[f64]) -> Result<Vec<f64>> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::Dimension(format!(
            "design has {n} rows but response has {}",
            y.len()
        )));
    }
    if p == 0 || n < p {
        return Err(Error::InsufficientData { n, p });
    }
    let (beta, _) = factor_and_solve(x, y)?;
    Ok(beta.iter().copied().collect())
}

pub fn ols_fit(x: &DMatrix<f64>, y: &[f64]) -> Result<FitResult> {
    let (n, p) = check_shape(x, y)?;
    let (beta, r) = factor_and_solve(x, y)?;

    let fitted = x * &beta;
    let rss: f64 = y.iter().zip(fitted.iter()).map(|(a, b)| (a - b).powi(2)).sum();
    let mean = y.iter().sum::<f64>() / n as f64;
    let tss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let residual_variance = rss / (n - p) as f64;

    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or(Error::SingularDesign { ratio: 0.0 })?;
    let standard_errors = (0..p)
        .map(|j| (residual_variance * r_inv.row(j).norm_squared()).sqrt())
        .collect();

    let r_squared = if tss > 0.0 {
        (1.0 - rss / tss).clamp(0.0, 1.0)
    } else {
        0.0
    };

    Ok(FitResult {
        coefficients: beta.iter().copied().collect(),
        standard_errors,
        residual_variance,
        r_squared,
        n,
        p,
    })
}

/// Residual variance of `v` regressed on `x`, with divisor n - p.
pub fn residual_variance_of(x: &DMatrix<f64>, v: &[f64]) -> Result<f64> {
    ols_fit(x, v).map(|f| f.residual_variance)
}

/// Repeated exposure-coefficient fits against a fixed set of adjustment
/// columns.
///
/// The adjustment columns (intercept plus covariates) are factored once.
/// Each call then partials them out of the candidate exposure and returns the
/// exposure coefficient of the full model `[1, exposure, covariates]`, which
/// by the Frisch-Waugh-Lovell theorem equals the full OLS coefficient.
#[derive(Debug, Clone)]
pub struct ExposureFitter {
    /// Orthonormal basis of the adjustment columns, one vector per column.
    basis: Vec<Vec<f64>>,
    n: usize,
}

impl ExposureFitter {
    /// `adjust` holds the covariate columns; the intercept is implicit.
    pub fn new(n: usize, adjust: &[&[f64]]) -> Result<Self> {
        let p = adjust.len() + 2;
        if n <= p {
            return Err(Error::InsufficientData { n, p });
        }
        let z = crate::dataset::design_from_columns(n, adjust);
        let qr = z.qr();
        let r = qr.r();
        let sv = r.singular_values();
        let ratio = sv.min() / sv.max();
        if ratio.is_nan() || ratio < RANK_TOLERANCE {
            return Err(Error::SingularDesign { ratio });
        }
        let q = qr.q();
        let basis = q.column_iter().map(|c| c.iter().copied().collect()).collect();
        Ok(Self { basis, n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Residual of `x` after projecting out the adjustment columns, written
    /// into `out`.
    pub fn partial_out(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(x);
        for q in &self.basis {
            let c: f64 = q.iter().zip(out.iter()).map(|(a, b)| a * b).sum();
            for (o, qi) in out.iter_mut().zip(q) {
                *o -= c * qi;
            }
        }
    }

    /// Exposure coefficient of `y ~ 1 + x + covariates`. `scratch` is reused
    /// between calls to avoid allocation.
    pub fn coefficient(&self, x: &[f64], y: &[f64], scratch: &mut Vec<f64>) -> Result<f64> {
        if x.len() != self.n || y.len() != self.n {
            return Err(Error::Dimension(format!(
                "expected {} rows, got exposure {} and outcome {}",
                self.n,
                x.len(),
                y.len()
            )));
        }
        self.partial_out(x, scratch);
        let rr: f64 = scratch.iter().map(|v| v * v).sum();
        let xx: f64 = x.iter().map(|v| v * v).sum();
        let ratio = (rr / xx).sqrt();
        if ratio.is_nan() || ratio < RANK_TOLERANCE {
            return Err(Error::SingularDesign { ratio });
        }
        let ry: f64 = scratch.iter().zip(y).map(|(a, b)| a * b).sum();
        Ok(ry / rr)
    }
}
