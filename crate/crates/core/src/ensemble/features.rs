use serde::{Deserialize, Serialize};

use crate::data::{asinh_transform, MarketDataset};
use crate::{Error, Result, HOURS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetTransform {
    Asinh,
    None,
}

impl TargetTransform {
    pub fn forward(self, v: f64) -> f64 {
        match self {
            TargetTransform::Asinh => asinh_transform(v),
            TargetTransform::None => v,
        }
    }

    pub fn inverse(self, v: f64) -> f64 {
        match self {
            TargetTransform::Asinh => crate::data::sinh_inverse(v),
            TargetTransform::None => v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    /// One model per hour of the day.
    PerHour,
    /// One model for all hours.
    Pooled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "arg", rename_all = "snake_case")]
pub enum Feature {
    /// Residual load of the target hour.
    Rl,
    /// Residual load raised to a power.
    RlPower(u32),
    /// Residual load of the same hour `k` days earlier.
    RlLag(usize),
    /// (Transformed) price of the same hour `k` days earlier.
    PriceLag(usize),
    /// 24 one-hot hour indicators.
    HourDummies,
}

impl Feature {
    pub fn width(&self) -> usize {
        match self {
            Feature::HourDummies => HOURS,
            _ => 1,
        }
    }

    fn lag(&self) -> usize {
        match self {
            Feature::RlLag(k) | Feature::PriceLag(k) => *k,
            _ => 0,
        }
    }
}

/// Sample weights `exp(-decay * (d - d_i)^2 - rl_distance * (RL - RL_i)^2)`,
/// with `d - d_i` in days and RL standardized over the training window.
///
/// A negative `decay` weights the past more heavily; weights are
/// renormalised by their maximum so they stay in `(0, 1]` either way.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightKernel {
    pub decay: f64,
    #[serde(default)]
    pub rl_distance: Option<f64>,
}

/// Smallest weight handed to the solvers; distant samples underflow otherwise.
pub const WEIGHT_FLOOR: f64 = 1e-300;

impl WeightKernel {
    pub fn temporal(decay: f64) -> Self {
        Self {
            decay,
            rl_distance: None,
        }
    }

    /// Weights from log-weights, shifted so the largest weight is 1.
    pub(crate) fn normalise(log_w: &mut [f64]) {
        let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for v in log_w.iter_mut() {
            *v = (*v - max).exp().max(WEIGHT_FLOOR);
        }
    }

    pub(crate) fn log_temporal(&self, day_gap: f64) -> f64 {
        -self.decay * day_gap * day_gap
    }
}

/// A linear expert: target transform, fitting granularity, regressors and
/// optional sample weighting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearExpertSpec {
    pub name: String,
    pub transform: TargetTransform,
    pub pooling: Pooling,
    pub intercept: bool,
    pub features: Vec<Feature>,
    #[serde(default)]
    pub kernel: Option<WeightKernel>,
    /// Standardize RL over the window before building regressors. Leaves the
    /// fitted function unchanged when the constant is in the span of the
    /// design, but keeps cubic terms of raw MW values well conditioned.
    #[serde(default)]
    pub standardize_rl: bool,
}

impl LinearExpertSpec {
    pub fn n_features(&self) -> usize {
        self.intercept as usize + self.features.iter().map(Feature::width).sum::<usize>()
    }

    /// Earliest day offset the features look back.
    pub fn max_lag(&self) -> usize {
        self.features.iter().map(Feature::lag).max().unwrap_or(0)
    }

    /// LW-LR-style experts refit per query point.
    pub fn is_local(&self) -> bool {
        self.kernel.is_some_and(|k| k.rl_distance.is_some())
    }

    pub fn arx_m() -> Self {
        Self {
            name: "ARX-M".into(),
            transform: TargetTransform::Asinh,
            pooling: Pooling::PerHour,
            intercept: true,
            features: arx_regressors(),
            kernel: None,
            standardize_rl: false,
        }
    }

    pub fn arx_u() -> Self {
        let mut features = arx_regressors();
        features.push(Feature::HourDummies);
        Self {
            name: "ARX-U".into(),
            transform: TargetTransform::Asinh,
            pooling: Pooling::Pooled,
            intercept: false,
            features,
            kernel: None,
            standardize_rl: false,
        }
    }

    pub fn poly_lr() -> Self {
        Self {
            name: "Poly-LR".into(),
            transform: TargetTransform::None,
            pooling: Pooling::Pooled,
            intercept: false,
            features: vec![Feature::Rl, Feature::RlPower(2), Feature::RlPower(3), Feature::HourDummies],
            kernel: Some(WeightKernel::temporal(0.01)),
            standardize_rl: true,
        }
    }

    pub fn lw_lr() -> Self {
        Self {
            name: "LW-LR".into(),
            transform: TargetTransform::None,
            pooling: Pooling::Pooled,
            intercept: true,
            features: vec![Feature::Rl],
            kernel: Some(WeightKernel {
                decay: 0.01,
                rl_distance: Some(10.0),
            }),
            standardize_rl: true,
        }
    }
}

fn arx_regressors() -> Vec<Feature> {
    vec![
        Feature::Rl,
        Feature::PriceLag(1),
        Feature::PriceLag(2),
        Feature::PriceLag(7),
        Feature::RlLag(1),
        Feature::RlLag(2),
        Feature::RlLag(7),
    ]
}

/// Affine map applied to RL values before they enter a design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RlNorm {
    pub center: f64,
    pub scale: f64,
}

impl RlNorm {
    pub const IDENTITY: RlNorm = RlNorm { center: 0.0, scale: 1.0 };

    /// Population mean and standard deviation of RL over `days`.
    pub fn fit(dataset: &MarketDataset, days: std::ops::Range<usize>) -> Result<Self> {
        let vals: Vec<f64> = days
            .flat_map(|d| dataset.residual_load().row(d).to_vec())
            .collect();
        let center = crate::stats::mean(&vals);
        let scale = crate::stats::population_std(&vals);
        if !(scale > 0.0) {
            return Err(Error::invalid("residual load is constant over the training window"));
        }
        Ok(Self { center, scale })
    }

    pub fn apply(&self, rl: f64) -> f64 {
        (rl - self.center) / self.scale
    }
}

/// Feature vector of `spec` for (`day`, `hour`), with raw RL values.
pub fn build_features(dataset: &MarketDataset, spec: &LinearExpertSpec, day: usize, hour: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(spec.n_features());
    features_into(dataset, spec, day, hour, RlNorm::IDENTITY, &mut out)?;
    Ok(out)
}

pub(crate) fn features_into(
    dataset: &MarketDataset,
    spec: &LinearExpertSpec,
    day: usize,
    hour: usize,
    norm: RlNorm,
    out: &mut Vec<f64>,
) -> Result<()> {
    if day >= dataset.n_days() || hour >= HOURS {
        return Err(Error::invalid(format!("day {day} hour {hour} is outside the dataset")));
    }
    let lag = spec.max_lag();
    if day < lag {
        return Err(Error::invalid(format!(
            "{} hour {hour}: {} needs the lag d-{lag}, which precedes the dataset start",
            dataset.date(day),
            spec.name
        )));
    }
    let rl = dataset.residual_load();
    let price = dataset.price();
    out.clear();
    if spec.intercept {
        out.push(1.0);
    }
    for f in &spec.features {
        match *f {
            Feature::Rl => out.push(norm.apply(rl[[day, hour]])),
            Feature::RlPower(k) => out.push(norm.apply(rl[[day, hour]]).powi(k as i32)),
            Feature::RlLag(k) => out.push(norm.apply(rl[[day - k, hour]])),
            Feature::PriceLag(k) => out.push(spec.transform.forward(price[[day - k, hour]])),
            Feature::HourDummies => out.extend((0..HOURS).map(|i| if i == hour { 1.0 } else { 0.0 })),
        }
    }
    Ok(())
}
