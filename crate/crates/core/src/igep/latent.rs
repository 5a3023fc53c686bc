use ndarray::{Array2, ArrayView2};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// How the half-ranges of the `D` latent uniforms are chosen.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum LatentMode {
    /// Half the range of the ensemble members in each dimension.
    #[default]
    Adaptive,
    /// The same half-range for every example and dimension.
    Fixed { half_range: f64 },
}

impl LatentMode {
    /// Setting used by the benchmark with latents independent of the ensemble.
    pub const INDEPENDENT: LatentMode = LatentMode::Fixed { half_range: 2.0 };

    pub fn deltas(&self, ensemble_half_range: &[f64]) -> Vec<f64> {
        match *self {
            LatentMode::Adaptive => ensemble_half_range.to_vec(),
            LatentMode::Fixed { half_range } => vec![half_range; ensemble_half_range.len()],
        }
    }
}

/// Latent distribution for one example: `D` uniforms on `[-delta_d, delta_d]`
/// followed by `J` uniforms on `[-halfwidth, halfwidth]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentSpec {
    pub delta: Vec<f64>,
    pub j_independent: usize,
    pub independent_halfwidth: f64,
}

impl LatentSpec {
    pub fn new(delta: Vec<f64>, j_independent: usize) -> Result<Self> {
        let spec = Self {
            delta,
            j_independent,
            independent_halfwidth: 1.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.delta.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(Error::invalid("latent half-ranges must be finite and non-negative"));
        }
        if !(self.independent_halfwidth.is_finite() && self.independent_halfwidth >= 0.0) {
            return Err(Error::invalid("independent latent half-width must be non-negative"));
        }
        Ok(())
    }

    pub fn d_adaptive(&self) -> usize {
        self.delta.len()
    }

    /// Total latent dimension `K = D + J`.
    pub fn k(&self) -> usize {
        self.delta.len() + self.j_independent
    }
}

#[inline]
fn symmetric_uniform(rng: &mut crate::rng::Rng, half: f64) -> f64 {
    half * (2.0 * rng.gen::<f64>() - 1.0)
}

/// One latent vector `z = [u; v]`.
pub fn sample_latent(spec: &LatentSpec, rng: &mut crate::rng::Rng) -> Vec<f64> {
    let mut z = Vec::with_capacity(spec.k());
    z.extend(spec.delta.iter().map(|&d| symmetric_uniform(rng, d)));
    z.extend((0..spec.j_independent).map(|_| symmetric_uniform(rng, spec.independent_halfwidth)));
    z
}

/// `S × K` matrix of latent draws, one row per scenario.
pub fn sample_latents(spec: &LatentSpec, s: usize, rng: &mut crate::rng::Rng) -> Array2<f64> {
    let k = spec.k();
    let mut flat = Vec::with_capacity(s * k);
    for _ in 0..s {
        flat.extend(sample_latent(spec, rng));
    }
    Array2::from_shape_vec((s, k), flat).unwrap()
}

/// Per-dimension ensemble mean and half-range of a `D × M` forecast matrix.
pub fn ensemble_stats(x: ArrayView2<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
    if x.ncols() < 2 {
        return Err(Error::invalid("ensemble statistics need at least two members"));
    }
    let m = x.ncols() as f64;
    let mut mean = Vec::with_capacity(x.nrows());
    let mut half = Vec::with_capacity(x.nrows());
    for row in x.rows() {
        let (lo, hi) = row
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        mean.push(row.sum() / m);
        half.push((hi - lo) / 2.0);
    }
    Ok((mean, half))
}
