//! Synthetic day-ahead market with a known data-generating process.
//!
//! Residual load is built from a seasonal load profile, persistent wind and a
//! solar profile. The price is a positive convex function of residual load
//! and calendar, times the exponential of an error that is autocorrelated
//! across days and hours. The error scale follows a persistent
//! log-volatility driver, so days on which the lag-based and the load-only
//! experts disagree are also the days with large errors.

use std::f64::consts::PI;

use chrono::{Datelike, NaiveDate, Weekday};
use ndarray::Array2;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::MarketDataset;
use crate::{Result, HOURS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub start: NaiveDate,
    pub n_days: usize,
    pub seed: u64,
    /// Multiplies the price error; 0 makes prices a deterministic function of
    /// residual load and calendar.
    pub noise_scale: f64,
    /// Base standard deviation of the log-price error.
    pub noise_sd: f64,
    /// Day-to-day autocorrelation of the price error.
    pub error_persistence: f64,
    /// Correlation of the price error between adjacent hours.
    pub hourly_correlation: f64,
    /// Autocorrelation and stationary standard deviation of the log-volatility driver.
    pub volatility_persistence: f64,
    pub volatility_sd: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            start: NaiveDate::from_ymd_opt(2015, 1, 1).expect("valid date"),
            n_days: 3 * 365,
            seed: 7,
            noise_scale: 1.0,
            noise_sd: 0.1,
            error_persistence: 0.3,
            hourly_correlation: 0.8,
            volatility_persistence: 0.9,
            volatility_sd: 0.5,
        }
    }
}

const RL_CENTER: f64 = 40_000.0;
const RL_WIDTH: f64 = 16_000.0;

/// Price as a function of residual load and calendar, without error.
/// Bounded below by 8 EUR/MWh.
pub fn price_curve(rl: f64, hour: usize, weekend: bool) -> f64 {
    let u = (rl - RL_CENTER) / RL_WIDTH;
    let calendar = 3.0 * (2.0 * PI * (hour as f64 - 7.0) / 24.0).sin() - if weekend { 2.0 } else { 0.0 };
    15.0 + 30.0 * (0.6 * u).exp() + calendar
}

fn ar1(rng: &mut crate::rng::Rng, n: usize, phi: f64, sd: f64) -> Vec<f64> {
    let innov = sd * (1.0 - phi * phi).sqrt();
    let mut out = Vec::with_capacity(n);
    let mut x = sd * rng.sample::<f64, _>(StandardNormal);
    for _ in 0..n {
        out.push(x);
        x = phi * x + innov * rng.sample::<f64, _>(StandardNormal);
    }
    out
}

pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<MarketDataset> {
    let n = cfg.n_days;
    let mut rng = crate::rng::seeded(cfg.seed);
    let wind_latent = ar1(&mut rng, n + 1, 0.8, 1.0);
    let load_noise = ar1(&mut rng, n * HOURS, 0.9, 1500.0);
    let cloud: Vec<f64> = (0..n).map(|_| rng.gen_range(0.4..1.0)).collect();
    let vol = ar1(&mut rng, n, cfg.volatility_persistence, cfg.volatility_sd);

    let mut load = Array2::zeros((n, HOURS));
    let mut wind = Array2::zeros((n, HOURS));
    let mut pv = Array2::zeros((n, HOURS));
    let mut price = Array2::zeros((n, HOURS));
    let mut err_prev = [0.0; HOURS];
    let rho = cfg.hourly_correlation;
    for d in 0..n {
        let date = cfg.start + chrono::Days::new(d as u64);
        let weekend = matches!(date.weekday(), Weekday::Sat | Weekday::Sun);
        let doy = date.ordinal0() as f64;
        let winter = (2.0 * PI * doy / 365.0).cos();
        let season = 0.55 + 0.45 * (2.0 * PI * (doy - 172.0) / 365.0).cos();
        let sigma_day = cfg.noise_scale * cfg.noise_sd * (vol[d] - 0.5 * cfg.volatility_sd.powi(2)).exp();
        let mut eps = rng.sample::<f64, _>(StandardNormal);
        for h in 0..HOURS {
            let t = h as f64;
            let profile = 0.5 - 0.5 * (2.0 * PI * (t - 3.0) / 24.0).cos();
            let l = 52_000.0 + 9_000.0 * profile - if weekend { 6_000.0 } else { 0.0 } + 5_000.0 * winter
                + load_noise[d * HOURS + h];
            let frac = t / HOURS as f64;
            let wl = (1.0 - frac) * wind_latent[d] + frac * wind_latent[d + 1];
            let w = 4_000.0 + 8_000.0 * (0.3 * wl).exp();
            let sun = (PI * (t - 6.0) / 12.0).sin().max(0.0);
            let p = 25_000.0 * sun * season * cloud[d];
            let rl = l - w - p;
            if h > 0 {
                eps = rho * eps + (1.0 - rho * rho).sqrt() * rng.sample::<f64, _>(StandardNormal);
            }
            let err = cfg.error_persistence * err_prev[h] + sigma_day * eps;
            err_prev[h] = err;
            load[[d, h]] = l;
            wind[[d, h]] = w;
            pv[[d, h]] = p;
            price[[d, h]] = price_curve(rl, h, weekend) * err.exp();
        }
    }
    MarketDataset::new(cfg.start, price, load, wind, pv)
}
