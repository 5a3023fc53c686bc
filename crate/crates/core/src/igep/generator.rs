use ndarray::{Array2, ArrayView2};

use super::GeneratorParams;
use crate::error::ensure_dim;
use crate::Result;

/// Maps one latent vector `z = [u; v]` to an output vector.
pub fn generate(theta: &GeneratorParams, xbar: &[f64], z: &[f64]) -> Result<Vec<f64>> {
    ensure_dim(theta.output_dim(), xbar.len())?;
    ensure_dim(theta.latent_dim(), z.len())?;
    let mut out = vec![0.0; theta.output_dim()];
    generate_into(theta, xbar, z, &mut out);
    Ok(out)
}

#[inline]
pub(crate) fn generate_into(theta: &GeneratorParams, xbar: &[f64], z: &[f64], out: &mut [f64]) {
    let d = theta.output_dim();
    let (u, v) = z.split_at(d);
    for (i, o) in out.iter_mut().enumerate() {
        let g = theta.gamma.row(i);
        let w = theta.omega.row(i);
        let mut acc = theta.alpha[i] + theta.beta[i] * xbar[i];
        for (a, b) in g.iter().zip(u) {
            acc += a * b;
        }
        for (a, b) in w.iter().zip(v) {
            acc += a * b;
        }
        *o = acc;
    }
}

/// Maps each row of `latents` (`S × K`) to a scenario, giving `S × D`.
pub fn generate_batch(theta: &GeneratorParams, xbar: &[f64], latents: ArrayView2<f64>) -> Result<Array2<f64>> {
    ensure_dim(theta.output_dim(), xbar.len())?;
    ensure_dim(theta.latent_dim(), latents.ncols())?;
    let d = theta.output_dim();
    let mut out = Array2::zeros((latents.nrows(), d));
    for (z, mut row) in latents.rows().into_iter().zip(out.rows_mut()) {
        let z = z.to_vec();
        generate_into(theta, xbar, &z, row.as_slice_mut().unwrap());
    }
    Ok(out)
}
