//! Energy-score training loss of the generator and its closed-form gradient.
//!
//! With residuals `r_s = yhat_s - y` and pair differences `d_ss' = yhat_s - yhat_s'`
//! the per-example loss is `mean_s |r_s| - sum_{s<s'} |d_ss'| / (S (S - 1))`.
//! Its gradient with respect to scenario `s` is
//! `h_s = r_s / (S |r_s|) - g_s / (S (S - 1))` with
//! `g_s = sum_{s' != s} d_ss' / |d_ss'|`, which is then chained through the
//! linear generator. Zero-length residuals contribute a zero subgradient.

use ndarray::Array2;

use super::generator::generate_into;
use super::GeneratorParams;
use crate::error::ensure_dim;
use crate::{Error, Result};

/// One training example with its latent draws fixed.
#[derive(Debug, Clone)]
pub struct LossItem {
    pub xbar: Vec<f64>,
    pub y: Vec<f64>,
    /// `S × K`
    pub latents: Array2<f64>,
}

fn check(theta: &GeneratorParams, batch: &[LossItem]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::invalid("loss batch is empty"));
    }
    for item in batch {
        ensure_dim(theta.output_dim(), item.xbar.len())?;
        ensure_dim(theta.output_dim(), item.y.len())?;
        ensure_dim(theta.latent_dim(), item.latents.ncols())?;
        if item.latents.nrows() < 2 {
            return Err(Error::invalid("the loss needs at least two scenarios per example"));
        }
    }
    Ok(())
}

pub fn es_loss(theta: &GeneratorParams, batch: &[LossItem], lambda: f64) -> Result<f64> {
    check(theta, batch)?;
    let total: f64 = batch.iter().map(|it| item_loss(theta, it, None)).sum();
    Ok(total / batch.len() as f64 + lambda * theta.norm_sq())
}

pub fn grad_es_loss(theta: &GeneratorParams, batch: &[LossItem], lambda: f64) -> Result<GeneratorParams> {
    Ok(loss_and_grad(theta, batch, lambda)?.1)
}

/// Loss and gradient in one pass over the batch.
pub fn loss_and_grad(
    theta: &GeneratorParams,
    batch: &[LossItem],
    lambda: f64,
) -> Result<(f64, GeneratorParams)> {
    check(theta, batch)?;
    let mut grad = GeneratorParams::zeros(theta.output_dim(), theta.independent_dim());
    let mut total = 0.0;
    for item in batch {
        total += item_loss(theta, item, Some(&mut grad));
    }
    let n = batch.len() as f64;
    let mut flat = grad.to_flat();
    for (g, t) in flat.iter_mut().zip(theta.to_flat()) {
        *g = *g / n + 2.0 * lambda * t;
    }
    let grad = GeneratorParams::from_flat(theta.output_dim(), theta.independent_dim(), &flat)?;
    Ok((total / n + lambda * theta.norm_sq(), grad))
}

/// Data term minus diversity term for one example; accumulates the
/// (unnormalised by batch size) gradient when `grad` is given.
fn item_loss(theta: &GeneratorParams, item: &LossItem, grad: Option<&mut GeneratorParams>) -> f64 {
    let d = theta.output_dim();
    let s = item.latents.nrows();
    let k = theta.latent_dim();
    let latents = item.latents.as_standard_layout();
    let z = latents.as_slice().unwrap();

    let mut yhat = vec![0.0; s * d];
    for (zs, out) in z.chunks_exact(k).zip(yhat.chunks_exact_mut(d)) {
        generate_into(theta, &item.xbar, zs, out);
    }

    let want_grad = grad.is_some();
    let mut h = if want_grad { vec![0.0; s * d] } else { Vec::new() };
    let sf = s as f64;

    let mut data = 0.0;
    for (si, row) in yhat.chunks_exact(d).enumerate() {
        let norm = row
            .iter()
            .zip(&item.y)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        data += norm;
        if want_grad && norm > 0.0 {
            let hs = &mut h[si * d..(si + 1) * d];
            for ((hv, a), b) in hs.iter_mut().zip(row).zip(&item.y) {
                *hv += (a - b) / (norm * sf);
            }
        }
    }

    let pair_scale = 1.0 / (sf * (sf - 1.0));
    let mut pair = 0.0;
    let mut diff = vec![0.0; d];
    for i in 0..s {
        for j in (i + 1)..s {
            let (a, b) = (&yhat[i * d..(i + 1) * d], &yhat[j * d..(j + 1) * d]);
            let mut sq = 0.0;
            for ((df, x), y) in diff.iter_mut().zip(a).zip(b) {
                *df = x - y;
                sq += *df * *df;
            }
            let norm = sq.sqrt();
            pair += norm;
            if want_grad && norm > 0.0 {
                let c = pair_scale / norm;
                for (t, df) in diff.iter().enumerate() {
                    h[i * d + t] -= c * df;
                    h[j * d + t] += c * df;
                }
            }
        }
    }

    if let Some(grad) = grad {
        for si in 0..s {
            let hs = &h[si * d..(si + 1) * d];
            let zs = &z[si * k..(si + 1) * k];
            let (u, v) = zs.split_at(d);
            for t in 0..d {
                let hv = hs[t];
                if hv == 0.0 {
                    continue;
                }
                grad.alpha[t] += hv;
                grad.beta[t] += hv * item.xbar[t];
                let mut grow = grad.gamma.row_mut(t);
                for (g, uv) in grow.iter_mut().zip(u) {
                    *g += hv * uv;
                }
                let mut orow = grad.omega.row_mut(t);
                for (g, vv) in orow.iter_mut().zip(v) {
                    *g += hv * vv;
                }
            }
        }
    }

    data / sf - pair * pair_scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::{energy_score, ScoringConfig};
    use ndarray::array;

    #[test]
    fn zero_when_all_scenarios_hit_target() {
        let theta = GeneratorParams::initial(2, 1);
        let item = LossItem {
            xbar: vec![1.0, 2.0],
            y: vec![1.0, 2.0],
            latents: Array2::zeros((4, 3)),
        };
        assert_eq!(es_loss(&theta, &[item], 0.0).unwrap(), 0.0);
    }

    #[test]
    fn matches_energy_score_plus_penalty() {
        let mut theta = GeneratorParams::initial(2, 1);
        theta.omega[[0, 0]] = 0.5;
        theta.alpha[1] = -0.25;
        let item = LossItem {
            xbar: vec![1.0, 2.0],
            y: vec![0.3, 2.9],
            latents: array![[0.2, -0.4, 0.9], [-0.6, 0.1, -0.3]],
        };
        let scen = super::super::generate_batch(&theta, &item.xbar, item.latents.view()).unwrap();
        let es = energy_score(scen.view(), &item.y, &ScoringConfig::default()).unwrap();
        let lambda = 0.01;
        let loss = es_loss(&theta, &[item], lambda).unwrap();
        assert!((loss - (es + lambda * theta.norm_sq())).abs() < 1e-14);
    }

    #[test]
    fn penalty_at_initialisation_adds_two_d_lambda() {
        let d = 5;
        let theta = GeneratorParams::initial(d, 2);
        let item = LossItem {
            xbar: vec![0.1; d],
            y: vec![0.4; d],
            latents: Array2::from_shape_fn((3, d + 2), |(i, j)| (i as f64 - j as f64) * 0.1),
        };
        let a = es_loss(&theta, std::slice::from_ref(&item), 0.0).unwrap();
        let b = es_loss(&theta, &[item], 0.3).unwrap();
        assert!((b - a - 0.3 * (2 * d) as f64).abs() < 1e-12);
    }

    #[test]
    fn inactive_independent_latents_get_only_penalty_gradient() {
        let d = 3;
        let mut theta = GeneratorParams::initial(d, 2);
        theta.omega[[1, 0]] = 0.7;
        theta.omega[[2, 1]] = -0.4;
        let mut latents = Array2::from_shape_fn((5, d + 2), |(i, j)| ((i * 7 + j * 3) % 5) as f64 * 0.2 - 0.4);
        latents.column_mut(d).fill(0.0);
        latents.column_mut(d + 1).fill(0.0);
        let item = LossItem {
            xbar: vec![0.2, -0.1, 0.5],
            y: vec![1.0, 0.0, -1.0],
            latents,
        };
        let lambda = 0.05;
        let g = grad_es_loss(&theta, &[item], lambda).unwrap();
        for (gv, tv) in g.omega.iter().zip(theta.omega.iter()) {
            assert_eq!(*gv, 2.0 * lambda * tv);
        }
    }
}
