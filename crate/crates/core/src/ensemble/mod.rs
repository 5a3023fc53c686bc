//! Expert point forecasts: ARX-M, ARX-U, Poly-LR, LW-LR and gradient
//! boosted trees, refit on a rolling window to produce the out-of-sample
//! ensemble forecasts that feed the probabilistic models.

mod experts;
mod features;
mod gbdt;
mod rolling;
mod wls;

pub use experts::{default_experts, fit_expert, gb_features, predict_expert, ExpertSpec, FittedExpert, MIN_WINDOW_DAYS};
pub use features::{
    build_features, Feature, LinearExpertSpec, Pooling, RlNorm, TargetTransform, WeightKernel, WEIGHT_FLOOR,
};
pub use gbdt::{Gbdt, GbdtFit, GbdtSpec};
pub use rolling::{format_point_errors, rolling_forecast, PointErrors, RollingConfig, RollingForecasts};
pub use wls::{fit_wls, WLS_JITTER};
