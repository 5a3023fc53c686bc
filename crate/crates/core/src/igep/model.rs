use std::path::Path;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::generator::generate_into;
use super::latent::{ensemble_stats, sample_latent, LatentMode, LatentSpec};
use super::params::ParamsDoc;
use super::train::{train, TrainConfig, TrainingExample};
use super::GeneratorParams;
use crate::data::{EnsembleForecast, ScenarioSet, Standardizer};
use crate::error::ensure_dim;
use crate::rng::Rng;
use crate::{Error, Result};

/// Draws `s` scenarios in standardized units from a `D × M` standardized ensemble.
pub fn sample_standardized(
    theta: &GeneratorParams,
    x_std: ArrayView2<f64>,
    latent: LatentMode,
    s: usize,
    rng: &mut Rng,
) -> Result<Array2<f64>> {
    ensure_dim(theta.output_dim(), x_std.nrows())?;
    let (xbar, half_range) = ensemble_stats(x_std)?;
    let spec = LatentSpec::new(latent.deltas(&half_range), theta.independent_dim())?;
    let d = theta.output_dim();
    let mut out = Array2::zeros((s, d));
    for mut row in out.rows_mut() {
        let z = sample_latent(&spec, rng);
        generate_into(theta, &xbar, &z, row.as_slice_mut().unwrap());
    }
    Ok(out)
}

/// Standardizes the ensemble, samples `s` scenarios and maps them back to EUR/MWh.
pub fn predict_scenarios(
    theta: &GeneratorParams,
    forecast: &EnsembleForecast,
    latent: LatentMode,
    s: usize,
    standardizer: &Standardizer,
    rng: &mut Rng,
) -> Result<ScenarioSet> {
    if s == 0 {
        return Err(Error::invalid("at least one scenario must be requested"));
    }
    let x_std = forecast.values.mapv(|v| standardizer.apply(v));
    let scen = sample_standardized(theta, x_std.view(), latent, s, rng)?;
    ScenarioSet::new(forecast.day, scen.mapv(|v| standardizer.invert(v)))
}

/// A generator trained on price-standardized data, together with everything
/// needed to reproduce and apply it.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedGenerator {
    pub params: GeneratorParams,
    pub standardizer: Standardizer,
    pub seed: u64,
    pub config: TrainConfig,
    pub epoch_losses: Vec<f64>,
}

impl TrainedGenerator {
    /// Fits the standardizer on the realised prices, standardizes inputs and
    /// outputs, and trains.
    pub fn fit(forecasts: &[EnsembleForecast], actuals: &[Vec<f64>], config: &TrainConfig) -> Result<Self> {
        ensure_dim(forecasts.len(), actuals.len())?;
        let all: Vec<f64> = actuals.iter().flatten().copied().collect();
        let standardizer = Standardizer::fit(&all)?;
        let examples = forecasts
            .iter()
            .zip(actuals)
            .map(|(f, y)| {
                let x = f.values.mapv(|v| standardizer.apply(v));
                TrainingExample::from_ensemble(x.view(), y.iter().map(|&v| standardizer.apply(v)).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        let outcome = train(&examples, config)?;
        Ok(Self {
            params: outcome.params,
            standardizer,
            seed: config.seed,
            config: *config,
            epoch_losses: outcome.epoch_losses,
        })
    }

    pub fn predict(&self, forecast: &EnsembleForecast, s: usize, rng: &mut Rng) -> Result<ScenarioSet> {
        predict_scenarios(&self.params, forecast, self.config.latent, s, &self.standardizer, rng)
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = GeneratorDoc {
            params: ParamsDoc::from(&self.params),
            standardizer: self.standardizer,
            seed: self.seed,
            config: self.config,
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    /// Restores a model from its JSON document. Training losses are not stored.
    pub fn from_json(s: &str) -> Result<Self> {
        let doc: GeneratorDoc = serde_json::from_str(s)?;
        Ok(Self {
            params: GeneratorParams::try_from(doc.params)?,
            standardizer: doc.standardizer,
            seed: doc.seed,
            config: doc.config,
            epoch_losses: Vec::new(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

#[derive(Serialize, Deserialize)]
struct GeneratorDoc {
    #[serde(flatten)]
    params: ParamsDoc,
    standardizer: Standardizer,
    seed: u64,
    config: TrainConfig,
}
