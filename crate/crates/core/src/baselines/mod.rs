//! Benchmark scenario generators: the raw ensemble, multivariate Gaussian
//! errors, quantile regression averaging and nonhomogeneous Gaussian
//! regression marginals coupled by a Gaussian copula. The benchmark with
//! ensemble-independent latents reuses [`crate::igep`] with
//! [`LatentMode::INDEPENDENT`](crate::igep::LatentMode::INDEPENDENT).

mod copula;
mod marginal;
mod mge;
mod ngr;
mod qra;
mod raw;

pub use copula::{copula_sample, fit_gaussian_copula, normal_scores, pit_values, CopulaModel};
pub use marginal::{default_taus, quantiles_to_marginal, MarginalForecast};
pub use mge::{fit_mge, sample_mge, MgeModel};
pub use ngr::{
    ensemble_mean_spread, fit_ngr, fit_ngr_hour, ngr_objective, NgrCoefficients, NgrFit, NgrMethod, NgrParams,
    SIGMA_MIN,
};
pub use qra::{fit_qra, mean_pinball_loss, quantile_regression, QraModel, IRLS_MIN_SMOOTHING};
pub use raw::raw_ensemble_scenarios;

use crate::igep::{LatentMode, TrainConfig};

/// The IGEP training configuration with the latent half-ranges fixed at 2.
pub fn igep_independent(base: &TrainConfig) -> TrainConfig {
    TrainConfig {
        latent: LatentMode::INDEPENDENT,
        ..*base
    }
}
