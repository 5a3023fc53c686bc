use ndarray::{Array2, ArrayView2};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::ensure_dim;
use crate::linalg::{cholesky_jittered, clip_eigenvalues, to_nalgebra, to_ndarray, EIGEN_FLOOR};
use crate::rng::Rng;
use crate::{Error, Result};

/// Homoscedastic multivariate Gaussian errors around the ensemble mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MgeModel {
    pub covariance: Array2<f64>,
    /// Lower Cholesky factor of the repaired covariance.
    pub cholesky: Array2<f64>,
}

impl MgeModel {
    pub fn from_covariance(covariance: Array2<f64>) -> Result<Self> {
        let c = clip_eigenvalues(&to_nalgebra(&covariance), EIGEN_FLOOR, EIGEN_FLOOR);
        let cholesky = to_ndarray(&cholesky_jittered(&c)?);
        Ok(Self { covariance, cholesky })
    }

    pub fn dim(&self) -> usize {
        self.covariance.nrows()
    }
}

/// Fits the error covariance (divisor `N - 1`) from `N × D` residuals `y - xbar`.
pub fn fit_mge(residuals: ArrayView2<f64>) -> Result<MgeModel> {
    let (n, d) = residuals.dim();
    if n < 2 {
        return Err(Error::invalid("covariance estimation needs at least two residual vectors"));
    }
    if residuals.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("MGE residuals".into()));
    }
    if n <= d {
        log::warn!("only {n} residual vectors for a {d}-dimensional covariance; relying on jitter");
    }
    let mean = residuals.mean_axis(ndarray::Axis(0)).unwrap();
    let centered = &residuals - &mean;
    let cov = centered.t().dot(&centered) / (n as f64 - 1.0);
    MgeModel::from_covariance(cov)
}

/// `xbar + L n` for `s` independent standard normal vectors `n`.
pub fn sample_mge(model: &MgeModel, xbar: &[f64], s: usize, rng: &mut Rng) -> Result<Array2<f64>> {
    let d = model.dim();
    ensure_dim(d, xbar.len())?;
    let mut out = Array2::zeros((s, d));
    let mut noise = vec![0.0; d];
    for mut row in out.rows_mut() {
        for v in noise.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        for i in 0..d {
            let l = model.cholesky.row(i);
            row[i] = xbar[i] + (0..=i).map(|k| l[k] * noise[k]).sum::<f64>();
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_covariance_is_reproduced() {
        let model = MgeModel::from_covariance(Array2::eye(3)).unwrap();
        let n = 100_000;
        let draws = sample_mge(&model, &[1.0, -1.0, 0.0], n, &mut crate::rng::seeded(4)).unwrap();
        let mean = draws.mean_axis(ndarray::Axis(0)).unwrap();
        let c = &draws - &mean;
        let cov = c.t().dot(&c) / (n as f64 - 1.0);
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((cov[[i, j]] - target).abs() < 0.02, "{i},{j}: {}", cov[[i, j]]);
            }
        }
        assert!((mean[0] - 1.0).abs() < 0.02 && (mean[1] + 1.0).abs() < 0.02);
    }

    #[test]
    fn rank_deficient_residuals_still_factorise() {
        let res = Array2::from_shape_fn((3, 5), |(i, j)| (i + j) as f64);
        let model = fit_mge(res.view()).unwrap();
        assert!(model.cholesky.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn non_finite_residuals_are_rejected() {
        let mut res = Array2::zeros((10, 2));
        res[[3, 1]] = f64::NAN;
        assert!(fit_mge(res.view()).is_err());
    }
}
