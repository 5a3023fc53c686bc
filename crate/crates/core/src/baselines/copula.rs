use ndarray::{Array2, ArrayView2};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::marginal::MarginalForecast;
use crate::error::ensure_dim;
use crate::linalg::{cholesky_jittered, repair_correlation, to_nalgebra, to_ndarray};
use crate::rng::Rng;
use crate::stats::{average_ranks, normal_cdf, normal_quantile, pearson};
use crate::{Error, Result};

/// Gaussian copula with a repaired correlation matrix and its Cholesky factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopulaModel {
    pub correlation: Array2<f64>,
    pub cholesky: Array2<f64>,
}

impl CopulaModel {
    pub fn from_correlation(correlation: Array2<f64>) -> Result<Self> {
        let repaired = repair_correlation(&to_nalgebra(&correlation))?;
        let cholesky = to_ndarray(&cholesky_jittered(&repaired)?);
        Ok(Self {
            correlation: to_ndarray(&repaired),
            cholesky,
        })
    }

    pub fn dim(&self) -> usize {
        self.correlation.nrows()
    }
}

/// Normal scores of an `N × D` sample: average ranks over `N + 1`, through
/// the standard normal quantile function, column by column.
pub fn normal_scores(values: ArrayView2<f64>) -> Array2<f64> {
    let (n, d) = values.dim();
    let mut out = Array2::zeros((n, d));
    for j in 0..d {
        let ranks = average_ranks(&values.column(j).to_vec());
        for (i, r) in ranks.into_iter().enumerate() {
            out[[i, j]] = normal_quantile(r / (n as f64 + 1.0));
        }
    }
    out
}

/// Probability integral transforms `F_nd(y_nd)` of training observations
/// under their own predictive marginals.
pub fn pit_values(marginals: &[Vec<MarginalForecast>], actuals: ArrayView2<f64>) -> Result<Array2<f64>> {
    ensure_dim(marginals.len(), actuals.nrows())?;
    let d = actuals.ncols();
    let mut out = Array2::zeros(actuals.dim());
    for (n, row) in marginals.iter().enumerate() {
        ensure_dim(d, row.len())?;
        for (j, m) in row.iter().enumerate() {
            out[[n, j]] = m.cdf(actuals[[n, j]]);
        }
    }
    Ok(out)
}

/// Correlation of the normal scores of `N × D` training residuals (or PIT
/// values; only their ranks matter), repaired to be positive definite.
pub fn fit_gaussian_copula(residuals: ArrayView2<f64>) -> Result<CopulaModel> {
    let (n, d) = residuals.dim();
    if n < 30 {
        return Err(Error::invalid(format!("copula estimation needs at least 30 days, got {n}")));
    }
    if residuals.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("copula training residuals".into()));
    }
    let scores = normal_scores(residuals);
    let cols: Vec<Vec<f64>> = (0..d).map(|j| scores.column(j).to_vec()).collect();
    let mut corr = Array2::eye(d);
    for i in 0..d {
        for j in (i + 1)..d {
            let r = pearson(&cols[i], &cols[j]);
            // a constant column has undefined correlation; treat as independent
            let r = if r.is_finite() { r } else { 0.0 };
            corr[[i, j]] = r;
            corr[[j, i]] = r;
        }
    }
    CopulaModel::from_correlation(corr)
}

/// Draws `n ~ N(0, C)` and returns `F_d^{-1}(Phi(n_d))` per dimension.
pub fn copula_sample(
    marginals: &[MarginalForecast],
    copula: &CopulaModel,
    s: usize,
    rng: &mut Rng,
) -> Result<Array2<f64>> {
    let d = copula.dim();
    ensure_dim(d, marginals.len())?;
    let mut out = Array2::zeros((s, d));
    let mut noise = vec![0.0; d];
    for mut row in out.rows_mut() {
        for v in noise.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        for i in 0..d {
            let l = copula.cholesky.row(i);
            let n: f64 = (0..=i).map(|k| l[k] * noise[k]).sum();
            row[i] = marginals[i].inverse_cdf(normal_cdf(n));
        }
    }
    Ok(out)
}
