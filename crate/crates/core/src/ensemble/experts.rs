use std::ops::Range;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::features::{features_into, Pooling, RlNorm, WeightKernel};
use super::gbdt::{Gbdt, GbdtSpec};
use super::wls::fit_wls;
use super::LinearExpertSpec;
use crate::data::MarketDataset;
use crate::{Error, Result, HOURS};

/// Minimum number of usable training days in a window.
pub const MIN_WINDOW_DAYS: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ExpertSpec {
    Linear(LinearExpertSpec),
    Gbdt(GbdtSpec),
}

impl ExpertSpec {
    pub fn name(&self) -> &str {
        match self {
            ExpertSpec::Linear(s) => &s.name,
            ExpertSpec::Gbdt(s) => &s.name,
        }
    }

    pub fn max_lag(&self) -> usize {
        match self {
            ExpertSpec::Linear(s) => s.max_lag(),
            ExpertSpec::Gbdt(_) => 0,
        }
    }
}

/// ARX-U, ARX-M, Poly-LR, LW-LR and GB with their published settings.
pub fn default_experts() -> Vec<ExpertSpec> {
    vec![
        ExpertSpec::Linear(LinearExpertSpec::arx_u()),
        ExpertSpec::Linear(LinearExpertSpec::arx_m()),
        ExpertSpec::Linear(LinearExpertSpec::poly_lr()),
        ExpertSpec::Linear(LinearExpertSpec::lw_lr()),
        ExpertSpec::Gbdt(GbdtSpec::default()),
    ]
}

/// Training rows of a local expert: day index, normalised RL, target.
#[derive(Debug, Clone, PartialEq)]
struct LocalRow {
    day: usize,
    rl: f64,
    y: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Fitted {
    /// One coefficient vector per hour (per-hour pooling) or a single one.
    Linear { coef: Vec<Vec<f64>> },
    /// Refit for every query point.
    Local { rows: Vec<LocalRow> },
    Gbdt(Gbdt),
}

/// An expert fitted on one training window.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedExpert {
    spec: ExpertSpec,
    norm: RlNorm,
    /// The day the window precedes; temporal kernels are centred here.
    reference_day: usize,
    fitted: Fitted,
}

fn usable_days(window: &Range<usize>, lag: usize) -> Range<usize> {
    window.start.max(lag)..window.end
}

fn kernel_weights(kernel: Option<WeightKernel>, reference_day: usize, days: impl Iterator<Item = usize>) -> Vec<f64> {
    match kernel {
        None => days.map(|_| 1.0).collect(),
        Some(k) => {
            let mut w: Vec<f64> = days.map(|d| k.log_temporal(reference_day as f64 - d as f64)).collect();
            WeightKernel::normalise(&mut w);
            w
        }
    }
}

/// GB inputs: raw RL followed by the 24 hour indicators.
pub fn gb_features(dataset: &MarketDataset, day: usize, hour: usize) -> Vec<f64> {
    let mut row = vec![0.0; 1 + HOURS];
    row[0] = dataset.residual_load()[[day, hour]];
    row[1 + hour] = 1.0;
    row
}

/// Fits `spec` on the days in `window`, to forecast the day `window.end`
/// onwards. Days without the full lag history are skipped.
pub fn fit_expert(dataset: &MarketDataset, window: Range<usize>, spec: &ExpertSpec) -> Result<FittedExpert> {
    if window.end > dataset.n_days() {
        return Err(Error::invalid("training window extends past the dataset"));
    }
    let days = usable_days(&window, spec.max_lag());
    if days.len() < MIN_WINDOW_DAYS {
        return Err(Error::invalid(format!(
            "{} needs at least {MIN_WINDOW_DAYS} training days with full lags, got {}",
            spec.name(),
            days.len()
        )));
    }
    let reference_day = window.end;
    let price = dataset.price();
    match spec {
        ExpertSpec::Gbdt(g) => {
            let n = days.len() * HOURS;
            let mut x = Array2::zeros((n, 1 + HOURS));
            let mut y = Vec::with_capacity(n);
            let mut day_of = Vec::with_capacity(n);
            for (r, (d, h)) in days.clone().flat_map(|d| (0..HOURS).map(move |h| (d, h))).enumerate() {
                x.row_mut(r).assign(&ndarray::ArrayView1::from(&gb_features(dataset, d, h)));
                y.push(price[[d, h]]);
                day_of.push(d);
            }
            let w = kernel_weights(Some(g.kernel), reference_day, day_of.into_iter());
            let fit = Gbdt::fit(x.view(), &y, &w, g)?;
            Ok(FittedExpert {
                spec: spec.clone(),
                norm: RlNorm::IDENTITY,
                reference_day,
                fitted: Fitted::Gbdt(fit.model),
            })
        }
        ExpertSpec::Linear(l) => {
            let norm = if l.standardize_rl {
                RlNorm::fit(dataset, days.clone())?
            } else {
                RlNorm::IDENTITY
            };
            let fitted = if l.is_local() {
                let rows = days
                    .clone()
                    .flat_map(|d| (0..HOURS).map(move |h| (d, h)))
                    .map(|(d, h)| LocalRow {
                        day: d,
                        rl: norm.apply(dataset.residual_load()[[d, h]]),
                        y: l.transform.forward(price[[d, h]]),
                    })
                    .collect();
                Fitted::Local { rows }
            } else {
                let groups: Vec<Vec<usize>> = match l.pooling {
                    Pooling::PerHour => (0..HOURS).map(|h| vec![h]).collect(),
                    Pooling::Pooled => vec![(0..HOURS).collect()],
                };
                let coef = groups
                    .iter()
                    .map(|hours| fit_linear(dataset, l, &days, hours, norm, reference_day))
                    .collect::<Result<Vec<_>>>()?;
                Fitted::Linear { coef }
            };
            Ok(FittedExpert {
                spec: spec.clone(),
                norm,
                reference_day,
                fitted,
            })
        }
    }
}

fn fit_linear(
    dataset: &MarketDataset,
    spec: &LinearExpertSpec,
    days: &Range<usize>,
    hours: &[usize],
    norm: RlNorm,
    reference_day: usize,
) -> Result<Vec<f64>> {
    let p = spec.n_features();
    let n = days.len() * hours.len();
    let mut x = Array2::zeros((n, p));
    let mut y = Vec::with_capacity(n);
    let mut day_of = Vec::with_capacity(n);
    let mut buf = Vec::with_capacity(p);
    let mut r = 0;
    for d in days.clone() {
        for &h in hours {
            features_into(dataset, spec, d, h, norm, &mut buf)?;
            x.row_mut(r).assign(&ndarray::ArrayView1::from(&buf[..]));
            y.push(spec.transform.forward(dataset.price()[[d, h]]));
            day_of.push(d);
            r += 1;
        }
    }
    let w = kernel_weights(spec.kernel, reference_day, day_of.into_iter());
    fit_wls(x.view(), &y, &w)
}

impl FittedExpert {
    pub fn name(&self) -> &str {
        self.spec.name()
    }

    pub fn spec(&self) -> &ExpertSpec {
        &self.spec
    }

    /// Day-ahead forecast for all hours of `day` (original price scale).
    pub fn predict(&self, dataset: &MarketDataset, day: usize) -> Result<Vec<f64>> {
        if day < self.reference_day {
            return Err(Error::invalid(format!(
                "{} was fitted for days from {}, cannot forecast {}",
                self.name(),
                dataset.date(self.reference_day.min(dataset.n_days() - 1)),
                dataset.date(day)
            )));
        }
        match (&self.spec, &self.fitted) {
            (ExpertSpec::Gbdt(_), Fitted::Gbdt(model)) => {
                (0..HOURS).map(|h| model.predict(&gb_features(dataset, day, h))).collect()
            }
            (ExpertSpec::Linear(l), Fitted::Linear { coef }) => {
                let mut buf = Vec::with_capacity(l.n_features());
                (0..HOURS)
                    .map(|h| {
                        features_into(dataset, l, day, h, self.norm, &mut buf)?;
                        let w = if coef.len() == 1 { &coef[0] } else { &coef[h] };
                        let t: f64 = buf.iter().zip(w).map(|(a, b)| a * b).sum();
                        Ok(l.transform.inverse(t))
                    })
                    .collect()
            }
            (ExpertSpec::Linear(l), Fitted::Local { rows }) => {
                let kernel = l.kernel.expect("local experts carry a kernel");
                let c = kernel.rl_distance.unwrap_or(0.0);
                let mut x = Array2::zeros((rows.len(), 2));
                for (i, r) in rows.iter().enumerate() {
                    x[[i, 0]] = 1.0;
                    x[[i, 1]] = r.rl;
                }
                let y: Vec<f64> = rows.iter().map(|r| r.y).collect();
                (0..HOURS)
                    .map(|h| {
                        let q = self.norm.apply(dataset.residual_load()[[day, h]]);
                        let mut w: Vec<f64> = rows
                            .iter()
                            .map(|r| kernel.log_temporal(day as f64 - r.day as f64) - c * (q - r.rl) * (q - r.rl))
                            .collect();
                        WeightKernel::normalise(&mut w);
                        let b = fit_wls(x.view(), &y, &w)?;
                        Ok(l.transform.inverse(b[0] + b[1] * q))
                    })
                    .collect()
            }
            _ => unreachable!("fitted state always matches its spec"),
        }
    }
}

/// Convenience wrapper for [`FittedExpert::predict`].
pub fn predict_expert(fitted: &FittedExpert, dataset: &MarketDataset, day: usize) -> Result<Vec<f64>> {
    fitted.predict(dataset, day)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use rand::Rng as _;
    use rand_distr::StandardNormal;

    fn from_prices(price: Array2<f64>, rl: Array2<f64>) -> MarketDataset {
        let zeros = Array2::zeros(price.dim());
        MarketDataset::new(NaiveDate::from_ymd_opt(2015, 1, 1).unwrap(), price, rl, zeros.clone(), zeros).unwrap()
    }

    fn rmse(a: &[f64], b: &[f64]) -> f64 {
        (a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64).sqrt()
    }

    #[test]
    fn arx_m_on_its_own_process_reaches_the_noise_floor() {
        let days = 200;
        let mut rng = crate::rng::seeded(11);
        let rl = Array2::from_shape_fn((days, HOURS), |_| rng.gen_range(20_000.0..60_000.0));
        let mut t = Array2::<f64>::zeros((days, HOURS));
        let sigma = 0.02;
        for d in 0..days {
            for h in 0..HOURS {
                t[[d, h]] = if d < 7 {
                    3.5
                } else {
                    0.5 + 2e-5 * rl[[d, h]] + 0.4 * t[[d - 1, h]] + 0.1 * t[[d - 2, h]] + 0.15 * t[[d - 7, h]]
                        - 5e-6 * rl[[d - 1, h]]
                        + sigma * rng.sample::<f64, _>(StandardNormal)
                };
            }
        }
        let ds = from_prices(t.mapv(f64::sinh), rl);
        let spec = ExpertSpec::Linear(LinearExpertSpec::arx_m());
        let fitted = fit_expert(&ds, 0..180, &spec).unwrap();
        let mut errs = Vec::new();
        for d in 180..200 {
            let pred = fitted.predict(&ds, d).unwrap();
            for h in 0..HOURS {
                errs.push(pred[h].asinh() - t[[d, h]]);
            }
        }
        let r = rmse(&errs, &vec![0.0; errs.len()]);
        assert!(r < 1.15 * sigma, "rmse {r}");
    }

    #[test]
    fn lw_lr_beats_global_line_on_nonlinear_data() {
        let days = 120;
        let mut rng = crate::rng::seeded(5);
        let rl = Array2::from_shape_fn((days, HOURS), |_| rng.gen_range(20_000.0..60_000.0));
        let f = |r: f64| 40.0 + 15.0 * ((r - 40_000.0) / 8_000.0).sinh();
        let price = rl.mapv(|r| f(r) + 0.5 * rng.sample::<f64, _>(StandardNormal));
        let ds = from_prices(price, rl.clone());
        let lw = fit_expert(&ds, 0..100, &ExpertSpec::Linear(LinearExpertSpec::lw_lr())).unwrap();
        let global = ExpertSpec::Linear(LinearExpertSpec {
            name: "line".into(),
            kernel: None,
            ..LinearExpertSpec::lw_lr()
        });
        let gl = fit_expert(&ds, 0..100, &global).unwrap();
        let (mut e_lw, mut e_gl, mut truth) = (Vec::new(), Vec::new(), Vec::new());
        for d in 100..120 {
            e_lw.extend(lw.predict(&ds, d).unwrap());
            e_gl.extend(gl.predict(&ds, d).unwrap());
            truth.extend(rl.row(d).iter().map(|&r| f(r)));
        }
        assert!(rmse(&e_lw, &truth) < 0.5 * rmse(&e_gl, &truth));
    }

    #[test]
    fn poly_lr_recovers_a_cubic() {
        let days = 60;
        let mut rng = crate::rng::seeded(6);
        let rl = Array2::from_shape_fn((days, HOURS), |_| rng.gen_range(20_000.0..60_000.0));
        let f = |r: f64, h: usize| {
            let u = r / 10_000.0;
            1.0 + 0.5 * u * u * u - 2.0 * u + h as f64
        };
        let price = Array2::from_shape_fn((days, HOURS), |(d, h)| f(rl[[d, h]], h));
        let ds = from_prices(price, rl.clone());
        let fitted = fit_expert(&ds, 0..59, &ExpertSpec::Linear(LinearExpertSpec::poly_lr())).unwrap();
        let pred = fitted.predict(&ds, 59).unwrap();
        for h in 0..HOURS {
            assert!((pred[h] - f(rl[[59, h]], h)).abs() < 1e-6 * f(rl[[59, h]], h).abs().max(1.0));
        }
    }

    #[test]
    fn short_window_is_rejected() {
        let ds = from_prices(Array2::ones((40, HOURS)), Array2::ones((40, HOURS)));
        let err = fit_expert(&ds, 0..35, &ExpertSpec::Linear(LinearExpertSpec::arx_m())).unwrap_err();
        assert!(err.to_string().contains("ARX-M"));
    }

    #[test]
    fn experts_round_trip_through_json() {
        let specs = default_experts();
        let json = serde_json::to_string(&specs).unwrap();
        let back: Vec<ExpertSpec> = serde_json::from_str(&json).unwrap();
        assert_eq!(specs, back);
        let names: Vec<&str> = back.iter().map(ExpertSpec::name).collect();
        assert_eq!(names, ["ARX-U", "ARX-M", "Poly-LR", "LW-LR", "GB"]);
    }
}
