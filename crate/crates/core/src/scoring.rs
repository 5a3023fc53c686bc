//! Proper scoring rules (energy score, CRPS) and point-error metrics.
//!
//! The sample estimators here are used both as training losses and as
//! evaluation metrics, so the pair term defaults to the unbiased
//! `1 / (2 S (S - 1))` normalisation.

use ndarray::{ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::ensure_dim;
use crate::stats::{normal_cdf, normal_pdf, FRAC_1_SQRT_PI};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairEstimator {
    /// Pair sum divided by `2 S (S - 1)`; needs at least two scenarios.
    #[default]
    Unbiased,
    /// Pair sum divided by `2 S^2`.
    Biased,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoringConfig {
    pub es_beta: f64,
    pub pair_estimator: PairEstimator,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self {
            es_beta: 1.0,
            pair_estimator: PairEstimator::Unbiased,
        }
    }
}

impl ScoringConfig {
    pub fn new(es_beta: f64, pair_estimator: PairEstimator) -> Result<Self> {
        let cfg = Self {
            es_beta,
            pair_estimator,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.es_beta > 0.0 && self.es_beta < 2.0) {
            return Err(Error::invalid(format!(
                "energy score exponent must lie in (0, 2), got {}",
                self.es_beta
            )));
        }
        Ok(())
    }

    pub fn biased() -> Self {
        Self {
            pair_estimator: PairEstimator::Biased,
            ..Self::default()
        }
    }
}

#[inline]
fn dist_pow(a: &[f64], b: &[f64], beta: f64) -> f64 {
    let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    if beta == 1.0 {
        sq.sqrt()
    } else {
        sq.powf(0.5 * beta)
    }
}

/// Sum of `|x_i - x_j|` over all ordered pairs, via the sorted-order identity.
fn abs_pair_sum(xs: &[f64]) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    2.0 * sorted
        .iter()
        .enumerate()
        .map(|(i, x)| (2.0 * (i as f64 + 1.0) - n - 1.0) * x)
        .sum::<f64>()
}

/// Sample energy score of `scenarios` (`S × D`) against the observation `y`.
pub fn energy_score(scenarios: ArrayView2<f64>, y: &[f64], cfg: &ScoringConfig) -> Result<f64> {
    cfg.validate()?;
    let (s, d) = scenarios.dim();
    ensure_dim(d, y.len())?;
    if s == 0 {
        return Err(Error::invalid("energy score needs at least one scenario"));
    }
    if cfg.pair_estimator == PairEstimator::Unbiased && s < 2 {
        return Err(Error::invalid(
            "the unbiased energy score estimator needs at least two scenarios",
        ));
    }
    let beta = cfg.es_beta;
    let owned: Vec<f64>;
    let flat: &[f64] = match scenarios.as_slice() {
        Some(sl) => sl,
        None => {
            owned = scenarios.iter().copied().collect();
            &owned
        }
    };
    if flat.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("energy score input".into()));
    }
    let rows: Vec<&[f64]> = flat.chunks_exact(d).collect();

    let data_term = rows.iter().map(|r| dist_pow(r, y, beta)).sum::<f64>() / s as f64;
    let pair_sum = if d == 1 && beta == 1.0 {
        abs_pair_sum(flat)
    } else {
        let mut acc = 0.0;
        for i in 0..s {
            for j in (i + 1)..s {
                acc += dist_pow(rows[i], rows[j], beta);
            }
        }
        2.0 * acc
    };
    let denom = match cfg.pair_estimator {
        PairEstimator::Unbiased => 2.0 * s as f64 * (s as f64 - 1.0),
        PairEstimator::Biased => 2.0 * (s as f64) * (s as f64),
    };
    Ok(data_term - pair_sum / denom)
}

/// Sample CRPS; identical to [`energy_score`] with a single dimension.
pub fn crps_sample(samples: &[f64], y: f64, cfg: &ScoringConfig) -> Result<f64> {
    let view = ArrayView2::from_shape((samples.len(), 1), samples)
        .map_err(|e| Error::invalid(e.to_string()))?;
    energy_score(view, &[y], cfg)
}

/// CRPS averaged over the `D` marginals of a scenario set.
pub fn mean_marginal_crps(scenarios: ArrayView2<f64>, y: &[f64], cfg: &ScoringConfig) -> Result<f64> {
    ensure_dim(scenarios.ncols(), y.len())?;
    let mut total = 0.0;
    for (col, &obs) in scenarios.axis_iter(Axis(1)).zip(y) {
        total += crps_sample(&col.to_vec(), obs, cfg)?;
    }
    Ok(total / y.len() as f64)
}

/// Closed-form CRPS of a Gaussian predictive distribution.
pub fn crps_gaussian(mu: f64, sigma: f64, y: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    let z = (y - mu) / sigma;
    Ok(sigma * (z * (2.0 * normal_cdf(z) - 1.0) + 2.0 * normal_pdf(z) - FRAC_1_SQRT_PI))
}

pub fn pinball_loss(q_pred: f64, y: f64, tau: f64) -> Result<f64> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::invalid(format!("quantile level must lie in (0, 1), got {tau}")));
    }
    Ok(pinball(q_pred, y, tau))
}

#[inline]
pub(crate) fn pinball(q_pred: f64, y: f64, tau: f64) -> f64 {
    if y >= q_pred {
        tau * (y - q_pred)
    } else {
        (1.0 - tau) * (q_pred - y)
    }
}

fn check_pair(pred: ArrayView1<f64>, actual: ArrayView1<f64>) -> Result<()> {
    ensure_dim(pred.len(), actual.len())?;
    if pred.is_empty() {
        return Err(Error::invalid("error metrics need at least one value"));
    }
    Ok(())
}

pub fn mae(pred: ArrayView1<f64>, actual: ArrayView1<f64>) -> Result<f64> {
    check_pair(pred, actual)?;
    Ok(pred.iter().zip(actual).map(|(p, a)| (p - a).abs()).sum::<f64>() / pred.len() as f64)
}

pub fn rmse(pred: ArrayView1<f64>, actual: ArrayView1<f64>) -> Result<f64> {
    check_pair(pred, actual)?;
    Ok((pred.iter().zip(actual).map(|(p, a)| (p - a).powi(2)).sum::<f64>() / pred.len() as f64).sqrt())
}
