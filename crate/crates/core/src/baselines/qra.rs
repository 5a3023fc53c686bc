//! Quantile regression averaging: linear quantile regression of the realised
//! price on the individual ensemble members, for a grid of quantile levels.
//!
//! Each regression is solved by iteratively reweighted least squares with a
//! shrinking smoothing floor, then finished with exact simplex-style pivots
//! between vertices (fits interpolating `p` observations) until no edge
//! direction lowers the pinball loss.

use nalgebra::DMatrix;
use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::marginal::{quantiles_to_marginal, MarginalForecast};
use crate::ensemble::fit_wls;
use crate::error::ensure_dim;
use crate::scoring::pinball;
use crate::{Error, Result};

/// Final value of the IRLS smoothing floor on `|residual|`.
pub const IRLS_MIN_SMOOTHING: f64 = 1e-6;

fn predict_row(x: ArrayView2<f64>, i: usize, b: &[f64]) -> f64 {
    x.row(i).iter().zip(b).map(|(a, c)| a * c).sum()
}

/// Mean pinball loss of coefficients `b` on the design `x`.
pub fn mean_pinball_loss(x: ArrayView2<f64>, y: &[f64], b: &[f64], tau: f64) -> f64 {
    (0..y.len()).map(|i| pinball(predict_row(x, i, b), y[i], tau)).sum::<f64>() / y.len() as f64
}

fn irls(x: ArrayView2<f64>, y: &[f64], tau: f64) -> Result<Vec<f64>> {
    let n = y.len();
    let mut b = fit_wls(x, y, &vec![1.0; n])?;
    let scale = (0..n).map(|i| (y[i] - predict_row(x, i, &b)).abs()).sum::<f64>() / n as f64;
    let mut eps = (0.1 * scale).max(IRLS_MIN_SMOOTHING);
    let mut w = vec![0.0; n];
    loop {
        for _ in 0..30 {
            for (i, wi) in w.iter_mut().enumerate() {
                let r = y[i] - predict_row(x, i, &b);
                let side = if r >= 0.0 { tau } else { 1.0 - tau };
                *wi = side / r.abs().max(eps);
            }
            let next = fit_wls(x, y, &w)?;
            let change = next.iter().zip(&b).map(|(a, c)| (a - c).abs()).fold(0.0, f64::max);
            let size = next.iter().map(|v| v.abs()).fold(1.0, f64::max);
            b = next;
            if change <= 1e-10 * size {
                break;
            }
        }
        if eps <= IRLS_MIN_SMOOTHING {
            return Ok(b);
        }
        eps = (eps * 0.1).max(IRLS_MIN_SMOOTHING);
    }
}

/// Picks `p` linearly independent rows, preferring those with small `|r|`.
fn initial_basis(x: ArrayView2<f64>, r: &[f64]) -> Option<Vec<usize>> {
    let p = x.ncols();
    let mut order: Vec<usize> = (0..r.len()).collect();
    order.sort_by(|&a, &b| r[a].abs().total_cmp(&r[b].abs()));
    let mut ortho: Vec<Vec<f64>> = Vec::with_capacity(p);
    let mut basis = Vec::with_capacity(p);
    for i in order {
        let row: Vec<f64> = x.row(i).to_vec();
        let norm0 = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut v = row;
        for q in &ortho {
            let dot: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(q).for_each(|(a, b)| *a -= dot * b);
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-8 * norm0.max(1e-300) {
            v.iter_mut().for_each(|a| *a /= norm);
            ortho.push(v);
            basis.push(i);
            if basis.len() == p {
                return Some(basis);
            }
        }
    }
    None
}

fn vertex_descent(x: ArrayView2<f64>, y: &[f64], tau: f64, start: &[f64]) -> Vec<f64> {
    let (n, p) = x.dim();
    let r0: Vec<f64> = (0..n).map(|i| y[i] - predict_row(x, i, start)).collect();
    let Some(mut basis) = initial_basis(x, &r0) else {
        return start.to_vec();
    };
    let mut best = start.to_vec();
    let mut best_loss = mean_pinball_loss(x, y, start, tau);
    let mut in_basis = vec![false; n];
    let mut a = vec![0.0; n];
    for _ in 0..(50 * p + 50) {
        in_basis.iter_mut().for_each(|v| *v = false);
        basis.iter().for_each(|&i| in_basis[i] = true);
        let xb = DMatrix::from_fn(p, p, |i, j| x[[basis[i], j]]);
        let Some(inv) = xb.try_inverse() else { break };
        let b: Vec<f64> = (0..p).map(|j| (0..p).map(|k| inv[(j, k)] * y[basis[k]]).sum()).collect();
        let r: Vec<f64> = (0..n)
            .map(|i| if in_basis[i] { 0.0 } else { y[i] - predict_row(x, i, &b) })
            .collect();
        let loss = mean_pinball_loss(x, y, &b, tau);
        if loss < best_loss {
            best_loss = loss;
            best.clone_from(&b);
        }

        // steepest edge: moving basis point j off its zero residual
        let mut pick: Option<(f64, usize, f64)> = None;
        for j in 0..p {
            let dir: Vec<f64> = (0..p).map(|k| inv[(k, j)]).collect();
            let mut slope_pos = 0.0;
            let mut slope_neg = 0.0;
            let mut mass = 0.0;
            for i in 0..n {
                if in_basis[i] {
                    continue;
                }
                let ai = predict_row(x, i, &dir);
                mass += ai.abs();
                // residual r_i - t * sign * a_i
                let contrib = |s: f64| {
                    let a = s * ai;
                    if r[i] > 0.0 || (r[i] == 0.0 && a < 0.0) {
                        -tau * a
                    } else {
                        (1.0 - tau) * a
                    }
                };
                slope_pos += contrib(1.0);
                slope_neg += contrib(-1.0);
            }
            // the leaving point's residual becomes -sign * t
            slope_pos += 1.0 - tau;
            slope_neg += tau;
            let tol = -1e-12 * (mass + 1.0);
            for (slope, sign) in [(slope_pos, 1.0), (slope_neg, -1.0)] {
                if slope < tol && pick.is_none_or(|(s, _, _)| slope < s) {
                    pick = Some((slope, j, sign));
                }
            }
        }
        let Some((slope0, j, sign)) = pick else { break };

        let dir: Vec<f64> = (0..p).map(|k| sign * inv[(k, j)]).collect();
        let mut breaks: Vec<(f64, usize)> = Vec::new();
        for i in 0..n {
            if in_basis[i] {
                a[i] = 0.0;
                continue;
            }
            a[i] = predict_row(x, i, &dir);
            if a[i] != 0.0 {
                let t = r[i] / a[i];
                if t > 0.0 {
                    breaks.push((t, i));
                }
            }
        }
        breaks.sort_by(|u, v| u.0.total_cmp(&v.0));
        let mut slope = slope0;
        let mut enter = None;
        for &(_, i) in &breaks {
            slope += a[i].abs();
            if slope >= 0.0 {
                enter = Some(i);
                break;
            }
        }
        let Some(enter) = enter else { break };
        basis[j] = enter;
    }
    best
}

/// Coefficients of the linear `tau`-quantile regression of `y` on `x`.
pub fn quantile_regression(x: ArrayView2<f64>, y: &[f64], tau: f64) -> Result<Vec<f64>> {
    ensure_dim(x.nrows(), y.len())?;
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::invalid(format!("quantile level must lie in (0, 1), got {tau}")));
    }
    let warm = irls(x, y, tau)?;
    Ok(vertex_descent(x, y, tau, &warm))
}

/// Per-hour QRA coefficients: `coefficients[hour][tau] = [intercept, w_1, .., w_M]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QraModel {
    pub taus: Vec<f64>,
    pub coefficients: Vec<Vec<Vec<f64>>>,
}

fn design_for_hour(forecasts: &[Array2<f64>], hour: usize) -> Array2<f64> {
    let m = forecasts[0].ncols();
    Array2::from_shape_fn((forecasts.len(), m + 1), |(n, j)| {
        if j == 0 {
            1.0
        } else {
            forecasts[n][[hour, j - 1]]
        }
    })
}

/// Fits one quantile regression per hour and level. `forecasts` are `D × M`
/// ensemble matrices, `actuals` is `N × D`.
pub fn fit_qra(forecasts: &[Array2<f64>], actuals: ArrayView2<f64>, taus: &[f64]) -> Result<QraModel> {
    let first = forecasts.first().ok_or_else(|| Error::invalid("QRA needs training data"))?;
    let (d, m) = first.dim();
    ensure_dim(forecasts.len(), actuals.nrows())?;
    ensure_dim(d, actuals.ncols())?;
    if forecasts.iter().any(|f| f.dim() != (d, m)) {
        return Err(Error::invalid("ensemble forecasts differ in shape"));
    }
    if forecasts.len() < m + 2 {
        return Err(Error::invalid(format!(
            "QRA with {m} members needs at least {} training days",
            m + 2
        )));
    }
    let coefficients = (0..d)
        .into_par_iter()
        .map(|h| {
            let x = design_for_hour(forecasts, h);
            let y = actuals.column(h).to_vec();
            taus.iter().map(|&t| quantile_regression(x.view(), &y, t)).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(QraModel {
        taus: taus.to_vec(),
        coefficients,
    })
}

impl QraModel {
    /// Predictive marginals for one `D × M` ensemble forecast.
    pub fn marginals(&self, forecast: ArrayView2<f64>) -> Result<Vec<MarginalForecast>> {
        ensure_dim(self.coefficients.len(), forecast.nrows())?;
        (0..forecast.nrows())
            .map(|h| {
                let row = forecast.row(h);
                let values: Vec<f64> = self.coefficients[h]
                    .iter()
                    .map(|c| c[0] + c[1..].iter().zip(row.iter()).map(|(a, b)| a * b).sum::<f64>())
                    .collect();
                quantiles_to_marginal(&self.taus, &values)
            })
            .collect()
    }
}
