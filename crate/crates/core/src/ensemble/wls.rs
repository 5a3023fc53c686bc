use nalgebra::{DMatrix, DVector};
use ndarray::ArrayView2;

use crate::error::ensure_dim;
use crate::{Error, Result};

/// Relative pivot size below which the design is treated as rank deficient.
const RANK_TOL: f64 = 1e-10;
/// Ridge added to the normalised normal equations on rank deficiency.
pub const WLS_JITTER: f64 = 1e-8;

/// Weighted least squares: minimises `sum_i w_i (y_i - x_i' b)^2`.
///
/// Columns are scaled to unit weighted norm and the problem is solved by QR.
/// If the design is numerically rank deficient the normal equations with a
/// `1e-8` ridge on the scaled design are solved instead.
pub fn fit_wls(x: ArrayView2<f64>, y: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
    let (n, p) = x.dim();
    ensure_dim(n, y.len())?;
    ensure_dim(n, weights.len())?;
    if n < p {
        return Err(Error::invalid(format!("{n} rows cannot determine {p} coefficients")));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::invalid("weights must be finite and non-negative"));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("regression data".into()));
    }
    let sw: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    let mut a = DMatrix::from_fn(n, p, |i, j| sw[i] * x[[i, j]]);
    let b = DVector::from_fn(n, |i, _| sw[i] * y[i]);
    let scale: Vec<f64> = (0..p)
        .map(|j| {
            let nrm = a.column(j).norm();
            if nrm > 0.0 {
                nrm
            } else {
                1.0
            }
        })
        .collect();
    for (j, s) in scale.iter().enumerate() {
        a.column_mut(j).scale_mut(1.0 / s);
    }

    let qr = a.clone().qr();
    let r = qr.r();
    let max_diag = (0..p).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    let deficient = (0..p).any(|i| r[(i, i)].abs() <= RANK_TOL * max_diag.max(f64::MIN_POSITIVE));
    let coef = if !deficient {
        let mut qtb = b.clone();
        qr.q_tr_mul(&mut qtb);
        r.solve_upper_triangular(&qtb.rows(0, p).into_owned())
            .ok_or_else(|| Error::Singular("triangular solve failed".into()))?
    } else {
        log::debug!("rank-deficient design ({n}x{p}); using ridge jitter");
        let ata = a.transpose() * &a + DMatrix::identity(p, p) * WLS_JITTER;
        let atb = a.transpose() * &b;
        ata.cholesky()
            .ok_or_else(|| Error::Singular("weighted normal equations".into()))?
            .solve(&atb)
    };
    let out: Vec<f64> = coef.iter().zip(&scale).map(|(c, s)| c / s).collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("least-squares solution is not finite".into()));
    }
    Ok(out)
}
