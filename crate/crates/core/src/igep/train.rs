use ndarray::ArrayView2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adam::{AdamConfig, AdamState};
use super::latent::{ensemble_stats, sample_latents, LatentMode, LatentSpec};
use super::loss::{loss_and_grad, LossItem};
use super::GeneratorParams;
use crate::error::ensure_dim;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub scenarios_per_example: usize,
    pub lambda: f64,
    pub epochs: usize,
    pub j_independent: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    pub latent: LatentMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 3,
            scenarios_per_example: 25,
            lambda: 0.0,
            epochs: 100,
            j_independent: 10,
            adam: AdamConfig::default(),
            seed: 0,
            latent: LatentMode::Adaptive,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least one"));
        }
        if self.scenarios_per_example < 2 {
            return Err(Error::invalid("training needs at least two scenarios per example"));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::invalid("regularisation weight must be non-negative"));
        }
        if let LatentMode::Fixed { half_range } = self.latent {
            if !(half_range.is_finite() && half_range >= 0.0) {
                return Err(Error::invalid("fixed latent half-range must be non-negative"));
            }
        }
        Ok(())
    }
}

/// A training example in standardized units, with the ensemble reduced to its
/// per-dimension mean and half-range.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub xbar: Vec<f64>,
    pub half_range: Vec<f64>,
    pub y: Vec<f64>,
}

impl TrainingExample {
    /// From a `D × M` ensemble matrix and the realised `D`-vector.
    pub fn from_ensemble(x: ArrayView2<f64>, y: Vec<f64>) -> Result<Self> {
        let (xbar, half_range) = ensemble_stats(x)?;
        ensure_dim(xbar.len(), y.len())?;
        Ok(Self { xbar, half_range, y })
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: GeneratorParams,
    /// Mean batch loss of every epoch.
    pub epoch_losses: Vec<f64>,
}

/// Minimises the energy-score loss with Adam, starting from
/// [`GeneratorParams::initial`]. Batches are reshuffled every epoch and fresh
/// latents are drawn for every loss evaluation, all from one generator seeded
/// with `cfg.seed`.
pub fn train(data: &[TrainingExample], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let first = data.first().ok_or_else(|| Error::invalid("training data is empty"))?;
    let d = first.xbar.len();
    for ex in data {
        ensure_dim(d, ex.xbar.len())?;
        ensure_dim(d, ex.half_range.len())?;
        ensure_dim(d, ex.y.len())?;
    }
    let j = cfg.j_independent;
    let mut rng = crate::rng::seeded(cfg.seed);
    let mut flat = GeneratorParams::initial(d, j).to_flat();
    let mut adam = AdamState::new(flat.len());
    let specs: Vec<LatentSpec> = data
        .iter()
        .map(|ex| LatentSpec::new(cfg.latent.deltas(&ex.half_range), j))
        .collect::<Result<_>>()?;

    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        let mut count = 0usize;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let theta = GeneratorParams::from_flat(d, j, &flat)?;
            let batch: Vec<LossItem> = chunk
                .iter()
                .map(|&i| LossItem {
                    xbar: data[i].xbar.clone(),
                    y: data[i].y.clone(),
                    latents: sample_latents(&specs[i], cfg.scenarios_per_example, &mut rng),
                })
                .collect();
            let (loss, grad) = loss_and_grad(&theta, &batch, cfg.lambda)?;
            if !loss.is_finite() {
                return Err(Error::Training { epoch, batch: b, loss });
            }
            adam.step(&mut flat, &grad.to_flat(), &cfg.adam)?;
            sum += loss;
            count += 1;
        }
        epoch_losses.push(sum / count as f64);
        log::trace!("epoch {epoch}: loss {}", sum / count as f64);
    }
    Ok(TrainOutcome {
        params: GeneratorParams::from_flat(d, j, &flat)?,
        epoch_losses,
    })
}
