//! Linear baseline: one ordinary-least-squares model per forecast horizon.
//!
//! Fits go through a Householder QR of the intercept-augmented design. Columns
//! are processed in order and a column whose component orthogonal to the
//! already accepted columns vanishes is reported as dependent, so collinear
//! inputs surface as an error rather than an arbitrary solution.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FeatureName};
use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};

/// Relative threshold on a column's orthogonal residual below which it is
/// treated as a combination of earlier columns.
const RANK_TOL: f64 = 1e-10;

/// `y = intercept + coefficients · x + ε`, with `Var(ε)` estimated as
/// `RSS / (n - p - 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub residual_variance: f64,
}

impl LinearModel {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.intercept + dot(&self.coefficients, x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonModel {
    pub horizon: usize,
    #[serde(flatten)]
    pub model: LinearModel,
}

/// One linear model per target column, all over the same features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlrBank {
    pub feature_names: Vec<FeatureName>,
    pub models: Vec<HorizonModel>,
}

impl MlrBank {
    pub fn horizon_count(&self) -> usize {
        self.models.len()
    }
}

/// Least squares fit of `y` on `[1, x]`.
pub fn fit_ols(x: &Matrix, y: &[f64]) -> Result<LinearModel> {
    solve(x, y, 0.0, &|j| format!("column {j}"))
}

/// Ridge-penalized variant (intercept unpenalized). An extension over plain
/// OLS; `lambda = 0` is identical to [`fit_ols`].
pub fn fit_ridge(x: &Matrix, y: &[f64], lambda: f64) -> Result<LinearModel> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidConfig(format!("ridge lambda must be >= 0, got {lambda}")));
    }
    solve(x, y, lambda, &|j| format!("column {j}"))
}

fn solve(x: &Matrix, y: &[f64], lambda: f64, name: &dyn Fn(usize) -> String) -> Result<LinearModel> {
    let (n, p) = (x.rows(), x.cols());
    if y.len() != n {
        return Err(Error::Dimension(format!("{n} design rows but {} targets", y.len())));
    }
    if n <= p + 1 {
        return Err(Error::TooShort { len: n, needed: p + 2 });
    }
    if x.as_slice().iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("regression input".into()));
    }

    // Column-major working copy of [1 | x], plus sqrt(λ)·I rows for ridge.
    let extra = if lambda > 0.0 { p } else { 0 };
    let m = n + extra;
    let cols = p + 1;
    let mut a = vec![vec![0.0; m]; cols];
    for i in 0..n {
        a[0][i] = 1.0;
        for j in 0..p {
            a[j + 1][i] = x.get(i, j);
        }
    }
    for j in 0..extra {
        a[j + 1][n + j] = lambda.sqrt();
    }
    let mut rhs: Vec<f64> = y.iter().copied().chain(std::iter::repeat_n(0.0, extra)).collect();
    let norms: Vec<f64> = a.iter().map(|c| dot(c, c).sqrt()).collect();

    let mut dependent = Vec::new();
    let mut row = 0;
    let mut pivots = Vec::with_capacity(cols);
    for k in 0..cols {
        let tail = dot(&a[k][row..], &a[k][row..]).sqrt();
        if norms[k] == 0.0 || tail <= RANK_TOL * norms[k] {
            dependent.push(k);
            continue;
        }
        let alpha = if a[k][row] > 0.0 { -tail } else { tail };
        let mut v = a[k][row..].to_vec();
        v[0] -= alpha;
        let vv = dot(&v, &v);
        let reflect = |c: &mut [f64]| {
            let s = 2.0 * dot(&v, c) / vv;
            c.iter_mut().zip(&v).for_each(|(ci, vi)| *ci -= s * vi);
        };
        for c in a.iter_mut().skip(k) {
            reflect(&mut c[row..]);
        }
        reflect(&mut rhs[row..]);
        pivots.push(k);
        row += 1;
    }
    if !dependent.is_empty() {
        return Err(Error::RankDeficient {
            columns: dependent
                .into_iter()
                .map(|k| if k == 0 { "intercept".into() } else { name(k - 1) })
                .collect(),
        });
    }

    // Back substitution on the upper-triangular R.
    let mut beta = vec![0.0; cols];
    for k in (0..cols).rev() {
        let s: f64 = (k + 1..cols).map(|l| a[l][k] * beta[l]).sum();
        beta[k] = (rhs[k] - s) / a[k][k];
    }

    let model = LinearModel {
        intercept: beta[0],
        coefficients: beta[1..].to_vec(),
        residual_variance: 0.0,
    };
    let rss: f64 = (0..n)
        .map(|i| {
            let r = y[i] - model.predict_row(x.row(i));
            r * r
        })
        .sum();
    Ok(LinearModel {
        residual_variance: rss / (n - p - 1) as f64,
        ..model
    })
}

/// Fits one model per target column of `train`. The first failing horizon
/// aborts the bank.
pub fn fit_bank(train: &Dataset) -> Result<MlrBank> {
    fit_bank_with(train, None)
}

pub fn fit_bank_with(train: &Dataset, ridge: Option<f64>) -> Result<MlrBank> {
    let lambda = ridge.unwrap_or(0.0);
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidConfig(format!("ridge lambda must be >= 0, got {lambda}")));
    }
    let names = &train.feature_names;
    let namer = |j: usize| {
        names
            .get(j)
            .map_or_else(|| format!("column {j}"), |f| f.to_string())
    };
    let fits: Vec<Result<LinearModel>> = (0..train.y.cols())
        .into_par_iter()
        .map(|h| solve(&train.x, &train.y.column(h), lambda, &namer))
        .collect();
    let models = fits
        .into_iter()
        .enumerate()
        .map(|(horizon, r)| {
            r.map(|model| HorizonModel { horizon, model })
                .map_err(|e| Error::Horizon {
                    horizon,
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MlrBank {
        feature_names: names.clone(),
        models,
    })
}

/// Row `i`, column `h`: `intercept(h) + coefficients(h) · x[i]`.
pub fn predict_bank(bank: &MlrBank, x: &Matrix) -> Result<Matrix> {
    if x.cols() != bank.feature_names.len() {
        return Err(Error::Dimension(format!(
            "bank expects {} features, got {}",
            bank.feature_names.len(),
            x.cols()
        )));
    }
    let mut out = Matrix::zeros(x.rows(), bank.models.len());
    for (i, row) in x.iter_rows().enumerate() {
        for (h, m) in bank.models.iter().enumerate() {
            out.set(i, h, m.model.predict_row(row));
        }
    }
    Ok(out)
}

/// Coefficient of determination `1 - RSS/TSS`. Can be negative.
pub fn r2_score(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Dimension(format!(
            "{} targets vs {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.len() < 2 {
        return Err(Error::TooShort {
            len: y_true.len(),
            needed: 2,
        });
    }
    let mean = y_true.iter().sum::<f64>() / y_true.len() as f64;
    let tss: f64 = y_true.iter().map(|v| (v - mean).powi(2)).sum();
    if tss == 0.0 {
        return Err(Error::ConstantTarget);
    }
    let rss: f64 = y_true.iter().zip(y_pred).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(1.0 - rss / tss)
}
