use serde::{Deserialize, Serialize};

use crate::error::ensure_dim;
use crate::stats::{normal_cdf, normal_quantile};
use crate::{Error, Result};

/// The quantile levels 0.01, 0.02, ..., 0.99.
pub fn default_taus() -> Vec<f64> {
    (1..=99).map(|i| i as f64 / 100.0).collect()
}

/// Maximum tail slope as a multiple of the average slope between the
/// outermost grid quantiles.
const TAIL_SLOPE_CAP: f64 = 5.0;

/// A univariate predictive distribution with an inverse CDF.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MarginalForecast {
    /// Piecewise-linear quantile function through the grid, extended linearly
    /// to levels 0 and 1.
    QuantileGrid { taus: Vec<f64>, values: Vec<f64> },
    Gaussian { mu: f64, sigma: f64 },
}

/// Builds a grid marginal, sorting the values to undo quantile crossing.
pub fn quantiles_to_marginal(taus: &[f64], values: &[f64]) -> Result<MarginalForecast> {
    ensure_dim(taus.len(), values.len())?;
    if taus.len() < 2 {
        return Err(Error::invalid("a quantile grid needs at least two levels"));
    }
    if values.iter().chain(taus).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("quantile grid".into()));
    }
    if taus.windows(2).any(|w| !(w[0] < w[1])) || taus[0] <= 0.0 || taus[taus.len() - 1] >= 1.0 {
        return Err(Error::invalid("quantile levels must be increasing inside (0, 1)"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(MarginalForecast::QuantileGrid {
        taus: taus.to_vec(),
        values: sorted,
    })
}

impl MarginalForecast {
    pub fn gaussian(mu: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !mu.is_finite() || !sigma.is_finite() {
            return Err(Error::invalid(format!("invalid Gaussian marginal N({mu}, {sigma}^2)")));
        }
        Ok(MarginalForecast::Gaussian { mu, sigma })
    }

    /// The grid with the two tail end points at levels 0 and 1 added.
    fn knots(taus: &[f64], values: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let k = taus.len();
        let inner_slope = (values[k - 1] - values[0]) / (taus[k - 1] - taus[0]);
        let cap = TAIL_SLOPE_CAP * inner_slope;
        let lo_slope = ((values[1] - values[0]) / (taus[1] - taus[0])).min(cap);
        let hi_slope = ((values[k - 1] - values[k - 2]) / (taus[k - 1] - taus[k - 2])).min(cap);
        let mut t = Vec::with_capacity(k + 2);
        let mut q = Vec::with_capacity(k + 2);
        t.push(0.0);
        q.push(values[0] - lo_slope * taus[0]);
        t.extend_from_slice(taus);
        q.extend_from_slice(values);
        t.push(1.0);
        q.push(values[k - 1] + hi_slope * (1.0 - taus[k - 1]));
        (t, q)
    }

    pub fn inverse_cdf(&self, p: f64) -> f64 {
        match self {
            MarginalForecast::Gaussian { mu, sigma } => {
                mu + sigma * normal_quantile(p.clamp(1e-16, 1.0 - 1e-16))
            }
            MarginalForecast::QuantileGrid { taus, values } => {
                let (t, q) = Self::knots(taus, values);
                let p = p.clamp(0.0, 1.0);
                let i = t.partition_point(|&x| x <= p).clamp(1, t.len() - 1);
                let w = (p - t[i - 1]) / (t[i] - t[i - 1]);
                q[i - 1] + w * (q[i] - q[i - 1])
            }
        }
    }

    /// Right-continuous CDF, the generalised inverse of [`Self::inverse_cdf`].
    pub fn cdf(&self, v: f64) -> f64 {
        match self {
            MarginalForecast::Gaussian { mu, sigma } => normal_cdf((v - mu) / sigma),
            MarginalForecast::QuantileGrid { taus, values } => {
                let (t, q) = Self::knots(taus, values);
                if v < q[0] {
                    return 0.0;
                }
                if v >= q[q.len() - 1] {
                    return 1.0;
                }
                // last knot with q <= v; the next one is strictly larger
                let i = q.partition_point(|&x| x <= v);
                let (q0, q1) = (q[i - 1], q[i]);
                t[i - 1] + (v - q0) / (q1 - q0) * (t[i] - t[i - 1])
            }
        }
    }

    pub fn median(&self) -> f64 {
        self.inverse_cdf(0.5)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monotone_grid_is_unchanged() {
        let taus = default_taus();
        let vals: Vec<f64> = taus.iter().map(|t| 10.0 * t).collect();
        match quantiles_to_marginal(&taus, &vals).unwrap() {
            MarginalForecast::QuantileGrid { values, .. } => assert_eq!(values, vals),
            _ => unreachable!(),
        }
    }

    #[test]
    fn median_is_grid_value() {
        let taus = default_taus();
        let vals: Vec<f64> = taus.iter().map(|t| (t * 3.0f64).exp()).collect();
        let m = quantiles_to_marginal(&taus, &vals).unwrap();
        assert_eq!(m.inverse_cdf(0.5), vals[49]);
    }

    #[test]
    fn crossing_pair_is_sorted() {
        let taus = default_taus();
        let mut vals: Vec<f64> = taus.iter().map(|t| 10.0 * t).collect();
        vals[39] = 5.05;
        vals[40] = 4.95;
        match quantiles_to_marginal(&taus, &vals).unwrap() {
            MarginalForecast::QuantileGrid { values, .. } => {
                assert!(values.windows(2).all(|w| w[0] <= w[1]));
                assert_eq!(values.iter().filter(|&&v| v == 4.95 || v == 5.05).count(), 2);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn tails_extend_linearly_and_are_capped() {
        let m = quantiles_to_marginal(&[0.25, 0.5, 0.75], &[1.0, 2.0, 3.0]).unwrap();
        assert!((m.inverse_cdf(0.0) - 0.0).abs() < 1e-12);
        assert!((m.inverse_cdf(1.0) - 4.0).abs() < 1e-12);
        // last segment slope 10000 against an average of 1250.875: capped at 5x
        let taus: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
        let mut vals: Vec<f64> = (0..9).map(|i| i as f64 * 0.1).collect();
        vals[8] = 0.7 + 1000.0;
        let m = quantiles_to_marginal(&taus, &vals).unwrap();
        let cap = 5.0 * (1000.7 / 0.8);
        assert!((m.inverse_cdf(1.0) - (1000.7 + cap * 0.1)).abs() < 1e-9);
        assert!((m.inverse_cdf(0.0) - (-0.1)).abs() < 1e-12);
    }

    #[test]
    fn cdf_inverts_quantile_function() {
        let taus = default_taus();
        let vals: Vec<f64> = taus.iter().map(|t| 20.0 + 8.0 * normal_quantile(*t)).collect();
        let m = quantiles_to_marginal(&taus, &vals).unwrap();
        for p in [0.001, 0.013, 0.3, 0.5, 0.987, 0.9999] {
            assert!((m.cdf(m.inverse_cdf(p)) - p).abs() < 1e-12);
        }
        let g = MarginalForecast::gaussian(2.0, 3.0).unwrap();
        assert!((g.cdf(g.inverse_cdf(0.2)) - 0.2).abs() < 1e-14);
    }

    #[test]
    fn degenerate_grid_is_a_point_mass() {
        let taus = default_taus();
        let m = quantiles_to_marginal(&taus, &vec![7.0; 99]).unwrap();
        for p in [0.0, 0.01, 0.5, 0.999, 1.0] {
            assert_eq!(m.inverse_cdf(p), 7.0);
        }
        assert_eq!(m.cdf(6.9), 0.0);
        assert_eq!(m.cdf(7.0), 1.0);
    }

    #[test]
    fn non_finite_grid_is_rejected() {
        assert!(quantiles_to_marginal(&[0.1, 0.9], &[1.0, f64::NAN]).is_err());
        assert!(MarginalForecast::gaussian(0.0, 0.0).is_err());
    }
}
