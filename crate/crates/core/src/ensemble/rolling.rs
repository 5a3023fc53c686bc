use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::experts::{fit_expert, ExpertSpec, FittedExpert};
use crate::data::{EnsembleForecast, MarketDataset};
use crate::{Error, Result, HOURS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RollingConfig {
    pub window_days: usize,
    /// Refit every `k` days; forecasts in between reuse the last fit.
    pub refit_every: usize,
}

impl Default for RollingConfig {
    fn default() -> Self {
        Self {
            window_days: 365,
            refit_every: 1,
        }
    }
}

/// Out-of-sample expert forecasts and realised prices for consecutive days.
#[derive(Debug, Clone, PartialEq)]
pub struct RollingForecasts {
    pub forecasts: Vec<EnsembleForecast>,
    /// Realised prices, one `D`-vector per day.
    pub actuals: Vec<Vec<f64>>,
}

/// Fits every expert on the trailing `window_days` days and forecasts
/// `start..end` (dataset day indices), moving the window one day at a time.
pub fn rolling_forecast(
    dataset: &MarketDataset,
    specs: &[ExpertSpec],
    cfg: &RollingConfig,
    start: usize,
    end: usize,
) -> Result<RollingForecasts> {
    if specs.len() < 2 {
        return Err(Error::invalid("an ensemble needs at least two experts"));
    }
    if cfg.refit_every == 0 || cfg.window_days == 0 {
        return Err(Error::invalid("window length and refit cadence must be positive"));
    }
    if start < cfg.window_days {
        return Err(Error::invalid(format!(
            "the first target day {} needs {} days of history, only {start} available",
            dataset.date(start.min(dataset.n_days().saturating_sub(1))),
            cfg.window_days
        )));
    }
    if end > dataset.n_days() || start >= end {
        return Err(Error::invalid(format!("target range {start}..{end} is outside the dataset")));
    }
    let names: Vec<String> = specs.iter().map(|s| s.name().to_string()).collect();
    let blocks: Vec<usize> = (start..end).step_by(cfg.refit_every).collect();
    let per_block = blocks
        .par_iter()
        .map(|&fit_day| {
            let stage = |e: Error| e.in_stage("ensemble", Some(dataset.date(fit_day)));
            let fitted: Vec<FittedExpert> = specs
                .iter()
                .map(|s| fit_expert(dataset, fit_day - cfg.window_days..fit_day, s))
                .collect::<Result<_>>()
                .map_err(stage)?;
            (fit_day..(fit_day + cfg.refit_every).min(end))
                .map(|day| {
                    let stage = |e: Error| e.in_stage("ensemble", Some(dataset.date(day)));
                    let mut values = Array2::zeros((HOURS, specs.len()));
                    for (m, f) in fitted.iter().enumerate() {
                        let pred = f.predict(dataset, day).map_err(stage)?;
                        values.column_mut(m).assign(&Array1::from(pred));
                    }
                    EnsembleForecast::new(dataset.date(day), values, names.clone()).map_err(stage)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let forecasts: Vec<EnsembleForecast> = per_block.into_iter().flatten().collect();
    let actuals = (start..end).map(|d| dataset.prices_of_day(d).to_vec()).collect();
    Ok(RollingForecasts { forecasts, actuals })
}

/// MAE and RMSE of one point forecast over all days and hours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointErrors {
    pub name: String,
    pub mae: f64,
    pub rmse: f64,
}

impl RollingForecasts {
    pub fn len(&self) -> usize {
        self.forecasts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forecasts.is_empty()
    }

    pub fn model_names(&self) -> &[String] {
        self.forecasts.first().map(|f| &f.model_names[..]).unwrap_or(&[])
    }

    pub fn days(&self) -> Vec<NaiveDate> {
        self.forecasts.iter().map(|f| f.day).collect()
    }

    /// The ensemble average AVG for day `i`.
    pub fn avg(&self, i: usize) -> Vec<f64> {
        self.forecasts[i].mean()
    }

    /// Consecutive sub-range of days.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            forecasts: self.forecasts[range.clone()].to_vec(),
            actuals: self.actuals[range].to_vec(),
        }
    }

    /// MAE/RMSE per expert, followed by AVG.
    pub fn point_errors(&self) -> Vec<PointErrors> {
        let m = self.model_names().len();
        let actual: Vec<f64> = self.actuals.iter().flatten().copied().collect();
        let score = |name: String, pred: Vec<f64>| {
            let a = ndarray::ArrayView1::from(&actual[..]);
            let p = ndarray::ArrayView1::from(&pred[..]);
            PointErrors {
                name,
                mae: crate::scoring::mae(p, a).expect("matching lengths"),
                rmse: crate::scoring::rmse(p, a).expect("matching lengths"),
            }
        };
        let mut out: Vec<PointErrors> = (0..m)
            .map(|j| {
                let pred = self.forecasts.iter().flat_map(|f| f.values.column(j).to_vec()).collect();
                score(self.model_names()[j].clone(), pred)
            })
            .collect();
        let avg = (0..self.len()).flat_map(|i| self.avg(i)).collect();
        out.push(score("AVG".into(), avg));
        out
    }

    /// CSV with columns `date,hour,<experts...>,avg,actual_price`; hours are
    /// numbered 1 to 24.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let io = |e| Error::io(path, e);
        write!(w, "date,hour").map_err(io)?;
        for n in self.model_names() {
            write!(w, ",{n}").map_err(io)?;
        }
        writeln!(w, ",avg,actual_price").map_err(io)?;
        for (i, f) in self.forecasts.iter().enumerate() {
            let avg = self.avg(i);
            for h in 0..HOURS {
                write!(w, "{},{}", f.day, h + 1).map_err(io)?;
                for v in f.values.row(h) {
                    write!(w, ",{v}").map_err(io)?;
                }
                writeln!(w, ",{},{}", avg[h], self.actuals[i][h]).map_err(io)?;
            }
        }
        w.flush().map_err(io)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let header = rdr.headers()?.clone();
        let n = header.len();
        if n < 6 || &header[0] != "date" || &header[1] != "hour" || &header[n - 2] != "avg" || &header[n - 1] != "actual_price" {
            return Err(Error::Parse {
                line: 1,
                message: "expected columns date,hour,<experts>,avg,actual_price".into(),
            });
        }
        let names: Vec<String> = (2..n - 2).map(|i| header[i].to_string()).collect();
        let m = names.len();
        let mut forecasts = Vec::new();
        let mut actuals = Vec::new();
        let mut values = Array2::zeros((HOURS, m));
        let mut actual = vec![0.0; HOURS];
        for (k, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            let parse_err = |message: String| Error::Parse { line, message };
            let day = NaiveDate::parse_from_str(&rec[0], "%Y-%m-%d").map_err(|e| parse_err(e.to_string()))?;
            let hour: usize = rec[1].parse().map_err(|e: std::num::ParseIntError| parse_err(e.to_string()))?;
            if hour != k % HOURS + 1 {
                return Err(parse_err(format!("expected hour {}, found {hour}", k % HOURS + 1)));
            }
            let num = |i: usize| rec[i].parse::<f64>().map_err(|e| parse_err(format!("column {}: {e}", i + 1)));
            for j in 0..m {
                values[[hour - 1, j]] = num(2 + j)?;
            }
            actual[hour - 1] = num(n - 1)?;
            if hour == HOURS {
                forecasts.push(EnsembleForecast::new(day, values.clone(), names.clone())?);
                actuals.push(actual.clone());
            }
        }
        Ok(Self { forecasts, actuals })
    }
}

/// Plain-text MAE/RMSE table, one column per expert plus AVG.
pub fn format_point_errors(errors: &[PointErrors]) -> String {
    let mut s = format!("{:<6}", "");
    for e in errors {
        s.push_str(&format!("{:>10}", e.name));
    }
    s.push('\n');
    for (label, get) in [("MAE", (|e: &PointErrors| e.mae) as fn(&PointErrors) -> f64), ("RMSE", |e| e.rmse)] {
        s.push_str(&format!("{label:<6}"));
        for e in errors {
            s.push_str(&format!("{:>10.3}", get(e)));
        }
        s.push('\n');
    }
    s
}
