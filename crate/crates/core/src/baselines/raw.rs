use crate::data::{EnsembleForecast, ScenarioSet};
use crate::Result;

/// Uses the `M` ensemble members themselves as `M` equally likely scenarios.
pub fn raw_ensemble_scenarios(forecast: &EnsembleForecast) -> Result<ScenarioSet> {
    ScenarioSet::new(forecast.day, forecast.values.t().to_owned())
}
