//! Nonhomogeneous Gaussian regression: `N(b0 + b1 * xbar, (g0 + g1 * s)^2)`
//! with `s` the ensemble standard deviation, fitted per hour by maximum
//! likelihood or minimum CRPS. The spread is clipped from below at
//! [`SIGMA_MIN`] instead of passing through a link function.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::marginal::MarginalForecast;
use crate::error::ensure_dim;
use crate::stats::{normal_cdf, normal_pdf, sample_std, FRAC_1_SQRT_PI};
use crate::{Error, Result};

/// Lower bound for the predicted standard deviation (standardized units).
pub const SIGMA_MIN: f64 = 1e-3;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NgrMethod {
    Ml,
    Crps,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NgrCoefficients {
    pub b0: f64,
    pub b1: f64,
    pub g0: f64,
    pub g1: f64,
}

impl NgrCoefficients {
    fn from_slice(p: &[f64]) -> Self {
        Self {
            b0: p[0],
            b1: p[1],
            g0: p[2],
            g1: p[3],
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.b0, self.b1, self.g0, self.g1]
    }

    pub fn mu(&self, xbar: f64) -> f64 {
        self.b0 + self.b1 * xbar
    }

    pub fn sigma(&self, spread: f64) -> f64 {
        (self.g0 + self.g1 * spread).max(SIGMA_MIN)
    }
}

/// Mean objective over a training set and its gradient in `(b0, b1, g0, g1)`.
pub fn ngr_objective(params: &[f64; 4], xbar: &[f64], spread: &[f64], y: &[f64], method: NgrMethod) -> (f64, [f64; 4]) {
    let c = NgrCoefficients::from_slice(params);
    let mut total = 0.0;
    let mut g = [0.0; 4];
    for ((&x, &s), &obs) in xbar.iter().zip(spread).zip(y) {
        let mu = c.mu(x);
        let raw_sigma = c.g0 + c.g1 * s;
        let clipped = raw_sigma < SIGMA_MIN;
        let sigma = if clipped { SIGMA_MIN } else { raw_sigma };
        let z = (obs - mu) / sigma;
        let (val, d_mu, d_sigma) = match method {
            NgrMethod::Ml => (
                HALF_LN_2PI + sigma.ln() + 0.5 * z * z,
                -z / sigma,
                (1.0 - z * z) / sigma,
            ),
            NgrMethod::Crps => {
                let cdf = normal_cdf(z);
                let pdf = normal_pdf(z);
                (
                    sigma * (z * (2.0 * cdf - 1.0) + 2.0 * pdf - FRAC_1_SQRT_PI),
                    -(2.0 * cdf - 1.0),
                    2.0 * pdf - FRAC_1_SQRT_PI,
                )
            }
        };
        total += val;
        g[0] += d_mu;
        g[1] += d_mu * x;
        if !clipped {
            g[2] += d_sigma;
            g[3] += d_sigma * s;
        }
    }
    let n = y.len() as f64;
    (total / n, g.map(|v| v / n))
}

struct Minimum {
    x: [f64; 4],
    f: f64,
    converged: bool,
}

/// BFGS with Armijo backtracking.
fn bfgs<F: Fn(&[f64; 4]) -> (f64, [f64; 4])>(f: F, x0: [f64; 4], max_iter: usize) -> Minimum {
    let mut x = x0;
    let (mut fx, mut g) = f(&x);
    let mut h = [[0.0; 4]; 4];
    for (i, row) in h.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _ in 0..max_iter {
        let gnorm = g.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if gnorm < 1e-11 {
            return Minimum { x, f: fx, converged: true };
        }
        let mut dir = [0.0; 4];
        for i in 0..4 {
            dir[i] = -(0..4).map(|j| h[i][j] * g[j]).sum::<f64>();
        }
        let mut slope: f64 = dir.iter().zip(&g).map(|(a, b)| a * b).sum();
        if slope >= 0.0 {
            // reset to steepest descent
            h = [[0.0; 4]; 4];
            for i in 0..4 {
                h[i][i] = 1.0;
                dir[i] = -g[i];
            }
            slope = -g.iter().map(|v| v * v).sum::<f64>();
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let cand: [f64; 4] = std::array::from_fn(|i| x[i] + step * dir[i]);
            let (fc, gc) = f(&cand);
            if fc.is_finite() && fc <= fx + 1e-4 * step * slope {
                accepted = Some((cand, fc, gc));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fn_, gn)) = accepted else {
            return Minimum { x, f: fx, converged: gnorm < 1e-7 };
        };
        let s: [f64; 4] = std::array::from_fn(|i| xn[i] - x[i]);
        let yv: [f64; 4] = std::array::from_fn(|i| gn[i] - g[i]);
        let sy: f64 = s.iter().zip(&yv).map(|(a, b)| a * b).sum();
        let improvement = fx - fn_;
        x = xn;
        fx = fn_;
        g = gn;
        if sy > 1e-300 {
            let rho = 1.0 / sy;
            let hy: [f64; 4] = std::array::from_fn(|i| (0..4).map(|j| h[i][j] * yv[j]).sum());
            let yhy: f64 = yv.iter().zip(&hy).map(|(a, b)| a * b).sum();
            for i in 0..4 {
                for j in 0..4 {
                    h[i][j] += (1.0 + rho * yhy) * rho * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
                }
            }
        }
        if improvement.abs() <= 1e-16 * fx.abs().max(1.0) && step < 1e-12 {
            return Minimum { x, f: fx, converged: true };
        }
    }
    let gnorm = g.iter().map(|v| v.abs()).fold(0.0, f64::max);
    Minimum { x, f: fx, converged: gnorm < 1e-7 }
}

/// Fitted coefficients and final mean objective for one hour.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NgrFit {
    pub coefficients: NgrCoefficients,
    pub objective: f64,
}

/// Fits one NGR model by ML or minimum CRPS, started from least squares.
pub fn fit_ngr_hour(xbar: &[f64], spread: &[f64], y: &[f64], method: NgrMethod) -> Result<NgrFit> {
    ensure_dim(xbar.len(), y.len())?;
    ensure_dim(spread.len(), y.len())?;
    if y.len() < 10 {
        return Err(Error::invalid("NGR needs at least 10 training examples"));
    }
    if xbar.iter().chain(spread).chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("NGR training data".into()));
    }
    let design = Array2::from_shape_fn((y.len(), 2), |(i, j)| if j == 0 { 1.0 } else { xbar[i] });
    let ols = crate::ensemble::fit_wls(design.view(), y, &vec![1.0; y.len()])?;
    let resid: Vec<f64> = (0..y.len()).map(|i| y[i] - ols[0] - ols[1] * xbar[i]).collect();
    let x0 = [ols[0], ols[1], sample_std(&resid).max(SIGMA_MIN * 10.0), 0.0];
    let obj = |p: &[f64; 4]| ngr_objective(p, xbar, spread, y, method);
    let mut best = bfgs(obj, x0, 500);
    if !best.converged {
        // a restart from the end point usually clears a stale curvature estimate
        let again = bfgs(obj, best.x, 500);
        if again.f <= best.f {
            best = again;
        }
        if !best.converged {
            log::warn!("NGR ({method:?}) did not fully converge; objective {}", best.f);
        }
    }
    Ok(NgrFit {
        coefficients: NgrCoefficients::from_slice(&best.x),
        objective: best.f,
    })
}

/// Per-hour NGR coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NgrParams {
    pub method: NgrMethod,
    pub hours: Vec<NgrCoefficients>,
}

/// Ensemble mean and standard deviation (divisor `M - 1`) per hour of a `D × M` matrix.
pub fn ensemble_mean_spread(x: ArrayView2<f64>) -> (Vec<f64>, Vec<f64>) {
    x.rows()
        .into_iter()
        .map(|r| {
            let v = r.to_vec();
            (crate::stats::mean(&v), sample_std(&v))
        })
        .unzip()
}

/// Fits NGR for every hour from `D × M` ensemble matrices and `N × D` actuals.
pub fn fit_ngr(forecasts: &[Array2<f64>], actuals: ArrayView2<f64>, method: NgrMethod) -> Result<NgrParams> {
    let first = forecasts.first().ok_or_else(|| Error::invalid("NGR needs training data"))?;
    let d = first.nrows();
    ensure_dim(forecasts.len(), actuals.nrows())?;
    ensure_dim(d, actuals.ncols())?;
    let stats: Vec<(Vec<f64>, Vec<f64>)> = forecasts.iter().map(|f| ensemble_mean_spread(f.view())).collect();
    let hours = (0..d)
        .map(|h| {
            let xbar: Vec<f64> = stats.iter().map(|s| s.0[h]).collect();
            let spread: Vec<f64> = stats.iter().map(|s| s.1[h]).collect();
            let y = actuals.column(h).to_vec();
            Ok(fit_ngr_hour(&xbar, &spread, &y, method)?.coefficients)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(NgrParams { method, hours })
}

impl NgrParams {
    pub fn marginals(&self, forecast: ArrayView2<f64>) -> Result<Vec<MarginalForecast>> {
        ensure_dim(self.hours.len(), forecast.nrows())?;
        let (xbar, spread) = ensemble_mean_spread(forecast);
        self.hours
            .iter()
            .enumerate()
            .map(|(h, c)| MarginalForecast::gaussian(c.mu(xbar[h]), c.sigma(spread[h])))
            .collect()
    }
}
