use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::Method;
use crate::ensemble::PointErrors;
use crate::{Error, Result};

/// Mean and population standard deviation over repeats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    pub fn from_values(values: &[f64]) -> Self {
        let mean = crate::stats::mean(values);
        // identical repeats report exactly zero spread
        let std = if values.iter().all(|v| *v == values[0]) {
            0.0
        } else {
            crate::stats::population_std(values)
        };
        Self { mean, std }
    }
}

/// Test-set scores of one method in one repeat.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepeatScores {
    /// Mean energy score over test days.
    pub es: f64,
    /// Mean over test days of the CRPS averaged over hours.
    pub crps: f64,
    /// RMSE of the predictive mean over all test hours.
    pub rmse: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodScores {
    pub method: Method,
    pub es: Summary,
    pub crps: Summary,
    pub rmse: Summary,
}

impl MethodScores {
    pub fn from_repeats(method: Method, repeats: &[RepeatScores]) -> Self {
        let col = |f: fn(&RepeatScores) -> f64| Summary::from_values(&repeats.iter().map(f).collect::<Vec<_>>());
        Self {
            method,
            es: col(|r| r.es),
            crps: col(|r| r.crps),
            rmse: col(|r| r.rmse),
        }
    }
}

/// Probabilistic scores per method and point-forecast errors per expert.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub methods: Vec<MethodScores>,
    pub experts: Vec<PointErrors>,
}

const SCORE_METRICS: [&str; 3] = ["ES", "CRPS", "RMSE"];

fn metric(m: &MethodScores, name: &str) -> Summary {
    match name {
        "ES" => m.es,
        "CRPS" => m.crps,
        _ => m.rmse,
    }
}

impl ScoreReport {
    pub fn method(&self, method: Method) -> Option<&MethodScores> {
        self.methods.iter().find(|m| m.method == method)
    }

    /// Long-format CSV `table,metric,column,mean,std` with full precision.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("table,metric,column,mean,std\n");
        for name in SCORE_METRICS {
            for m in &self.methods {
                let v = metric(m, name);
                s.push_str(&format!("scores,{name},{},{},{}\n", m.method.id(), v.mean, v.std));
            }
        }
        for (name, get) in [("MAE", (|e: &PointErrors| e.mae) as fn(&PointErrors) -> f64), ("RMSE", |e| e.rmse)] {
            for e in &self.experts {
                s.push_str(&format!("experts,{name},{},{},0\n", e.name, get(e)));
            }
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let mut methods: Vec<MethodScores> = Vec::new();
        let mut experts: Vec<PointErrors> = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            let bad = |message: String| Error::Parse { line, message };
            if rec.len() != 5 {
                return Err(bad(format!("expected 5 fields, found {}", rec.len())));
            }
            let num = |i: usize| rec[i].parse::<f64>().map_err(|e| bad(e.to_string()));
            let value = Summary {
                mean: num(3)?,
                std: num(4)?,
            };
            match &rec[0] {
                "scores" => {
                    let method = Method::from_id(&rec[2])?;
                    let idx = match methods.iter().position(|m| m.method == method) {
                        Some(i) => i,
                        None => {
                            let nan = Summary { mean: f64::NAN, std: f64::NAN };
                            methods.push(MethodScores {
                                method,
                                es: nan,
                                crps: nan,
                                rmse: nan,
                            });
                            methods.len() - 1
                        }
                    };
                    let m = &mut methods[idx];
                    match &rec[1] {
                        "ES" => m.es = value,
                        "CRPS" => m.crps = value,
                        "RMSE" => m.rmse = value,
                        other => return Err(bad(format!("unknown score `{other}`"))),
                    }
                }
                "experts" => {
                    let name = rec[2].to_string();
                    let idx = match experts.iter().position(|e| e.name == name) {
                        Some(i) => i,
                        None => {
                            experts.push(PointErrors {
                                name,
                                mae: f64::NAN,
                                rmse: f64::NAN,
                            });
                            experts.len() - 1
                        }
                    };
                    match &rec[1] {
                        "MAE" => experts[idx].mae = value.mean,
                        "RMSE" => experts[idx].rmse = value.mean,
                        other => return Err(bad(format!("unknown error measure `{other}`"))),
                    }
                }
                other => return Err(bad(format!("unknown table `{other}`"))),
            }
        }
        Ok(Self { methods, experts })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    /// Wide text table: one row per metric, one column per method, entries
    /// `mean ± std` to three decimals; followed by the expert error table.
    pub fn to_text(&self) -> String {
        let cells: Vec<Vec<String>> = SCORE_METRICS
            .iter()
            .map(|name| {
                self.methods
                    .iter()
                    .map(|m| {
                        let v = metric(m, name);
                        format!("{:.3} ± {:.3}", v.mean, v.std)
                    })
                    .collect()
            })
            .collect();
        let widths: Vec<usize> = self
            .methods
            .iter()
            .enumerate()
            .map(|(j, m)| {
                cells
                    .iter()
                    .map(|row| row[j].chars().count())
                    .chain([m.method.id().len()])
                    .max()
                    .unwrap()
            })
            .collect();
        let mut s = format!("{:<6}", "");
        for (m, w) in self.methods.iter().zip(&widths) {
            s.push_str(&format!("  {:>w$}", m.method.id(), w = *w));
        }
        s.push('\n');
        for (name, row) in SCORE_METRICS.iter().zip(&cells) {
            s.push_str(&format!("{name:<6}"));
            for (c, w) in row.iter().zip(&widths) {
                let pad = w - c.chars().count();
                s.push_str(&format!("  {}{c}", " ".repeat(pad)));
            }
            s.push('\n');
        }
        if !self.experts.is_empty() {
            s.push('\n');
            s.push_str(&crate::ensemble::format_point_errors(&self.experts));
        }
        s
    }
}
