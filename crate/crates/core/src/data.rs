//! Domain data model: the hourly market panel, ensemble forecasts, scenario
//! sets, CSV ingestion and the price standardizer.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use chrono::{DateTime, Duration, NaiveDate, NaiveDateTime, Timelike};
use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, HOURS};

/// Day × hour panel of prices (EUR/MWh) and day-ahead load, wind and solar
/// forecasts (MW). Days are contiguous and every day has exactly 24 hours.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketDataset {
    start: NaiveDate,
    price: Array2<f64>,
    load: Array2<f64>,
    wind: Array2<f64>,
    pv: Array2<f64>,
    residual_load: Array2<f64>,
}

pub fn residual_load(load: f64, wind: f64, pv: f64) -> f64 {
    load - wind - pv
}

impl MarketDataset {
    /// Builds a dataset from `days × 24` panels starting at `start`.
    pub fn new(
        start: NaiveDate,
        price: Array2<f64>,
        load: Array2<f64>,
        wind: Array2<f64>,
        pv: Array2<f64>,
    ) -> Result<Self> {
        let n = price.nrows();
        if n == 0 {
            return Err(Error::invalid("dataset has no days"));
        }
        for (name, a) in [("price", &price), ("load", &load), ("wind", &wind), ("pv", &pv)] {
            if a.dim() != (n, HOURS) {
                return Err(Error::invalid(format!(
                    "{name} panel has shape {:?}, expected ({n}, {HOURS})",
                    a.dim()
                )));
            }
            if let Some(pos) = a.iter().position(|v| !v.is_finite()) {
                let date = start + Duration::days((pos / HOURS) as i64);
                return Err(Error::Structure {
                    date,
                    message: format!("non-finite {name} at hour {}", pos % HOURS),
                });
            }
        }
        let residual_load = Array2::from_shape_fn((n, HOURS), |(d, h)| {
            residual_load(load[[d, h]], wind[[d, h]], pv[[d, h]])
        });
        Ok(Self {
            start,
            price,
            load,
            wind,
            pv,
            residual_load,
        })
    }

    pub fn n_days(&self) -> usize {
        self.price.nrows()
    }

    pub fn start(&self) -> NaiveDate {
        self.start
    }

    pub fn date(&self, day: usize) -> NaiveDate {
        self.start + Duration::days(day as i64)
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        (0..self.n_days()).map(|d| self.date(d)).collect()
    }

    /// Index of `date`, if it lies inside the dataset.
    pub fn day_index(&self, date: NaiveDate) -> Option<usize> {
        let off = (date - self.start).num_days();
        (off >= 0 && (off as usize) < self.n_days()).then_some(off as usize)
    }

    pub fn price(&self) -> &Array2<f64> {
        &self.price
    }

    pub fn load(&self) -> &Array2<f64> {
        &self.load
    }

    pub fn wind(&self) -> &Array2<f64> {
        &self.wind
    }

    pub fn pv(&self) -> &Array2<f64> {
        &self.pv
    }

    pub fn residual_load(&self) -> &Array2<f64> {
        &self.residual_load
    }

    pub fn prices_of_day(&self, day: usize) -> ArrayView1<'_, f64> {
        self.price.row(day)
    }

    /// A copy of the dataset with the prices replaced, used for look-ahead tests.
    pub fn with_prices(&self, price: Array2<f64>) -> Result<Self> {
        Self::new(self.start, price, self.load.clone(), self.wind.clone(), self.pv.clone())
    }

    /// Writes the dataset in the ingestion CSV format.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "timestamp,price,load_forecast,wind_forecast,solar_forecast").map_err(io)?;
        for d in 0..self.n_days() {
            let date = self.date(d);
            for h in 0..HOURS {
                writeln!(
                    w,
                    "{}T{:02}:00:00,{},{},{},{}",
                    date.format("%Y-%m-%d"),
                    h,
                    self.price[[d, h]],
                    self.load[[d, h]],
                    self.wind[[d, h]],
                    self.pv[[d, h]]
                )
                .map_err(io)?;
            }
        }
        w.flush().map_err(io)
    }
}

/// Column names of the ingestion CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvSchema {
    pub timestamp: String,
    pub price: String,
    pub load: String,
    pub wind: String,
    pub pv: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            timestamp: "timestamp".into(),
            price: "price".into(),
            load: "load_forecast".into(),
            wind: "wind_forecast".into(),
            pv: "solar_forecast".into(),
        }
    }
}

/// What to do with days that do not have exactly 24 hourly records.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    #[default]
    Reject,
    /// Missing hours take the values of the previous available hour;
    /// duplicated hours keep the first record.
    ForwardFill,
}

fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.naive_local());
    }
    ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

/// Reads an hourly market CSV into a [`MarketDataset`].
pub fn ingest_csv(path: &Path, schema: &CsvSchema, policy: MissingPolicy) -> Result<MarketDataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_reader(file, schema, policy)
}

pub fn ingest_reader<R: std::io::Read>(
    reader: R,
    schema: &CsvSchema,
    policy: MissingPolicy,
) -> Result<MarketDataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("missing column `{name}`"),
        })
    };
    let cols = [
        col(&schema.price)?,
        col(&schema.load)?,
        col(&schema.wind)?,
        col(&schema.pv)?,
    ];
    let ts_col = col(&schema.timestamp)?;

    type DayRows = [Option<[f64; 4]>; HOURS];
    let mut days: BTreeMap<NaiveDate, DayRows> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let perr = |message: String| Error::Parse { line, message };
        let raw_ts = rec.get(ts_col).ok_or_else(|| perr("missing timestamp field".into()))?;
        let ts = parse_timestamp(raw_ts).ok_or_else(|| perr(format!("bad timestamp `{raw_ts}`")))?;
        if ts.minute() != 0 || ts.second() != 0 {
            return Err(perr(format!("timestamp `{raw_ts}` is not on the hour")));
        }
        let mut vals = [0.0; 4];
        for (v, &c) in vals.iter_mut().zip(&cols) {
            let field = rec.get(c).ok_or_else(|| perr("row has too few fields".into()))?;
            *v = field
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| perr(format!("bad number `{field}`")))?;
        }
        let slot = &mut days.entry(ts.date()).or_insert([None; HOURS])[ts.hour() as usize];
        match (slot.is_some(), policy) {
            (true, MissingPolicy::Reject) => {
                return Err(Error::Structure {
                    date: ts.date(),
                    message: format!("duplicate record for hour {}", ts.hour()),
                })
            }
            (true, MissingPolicy::ForwardFill) => {}
            (false, _) => *slot = Some(vals),
        }
    }
    let (&first, _) = days.iter().next().ok_or_else(|| Error::invalid("CSV has no data rows"))?;
    let (&last, _) = days.iter().next_back().unwrap();
    let n = (last - first).num_days() as usize + 1;
    let mut panels = [
        Array2::zeros((n, HOURS)),
        Array2::zeros((n, HOURS)),
        Array2::zeros((n, HOURS)),
        Array2::zeros((n, HOURS)),
    ];
    let mut prev: Option<[f64; 4]> = None;
    for d in 0..n {
        let date = first + Duration::days(d as i64);
        let rows = days.get(&date);
        let present = rows.map_or(0, |r| r.iter().filter(|x| x.is_some()).count());
        if present != HOURS && policy == MissingPolicy::Reject {
            return Err(Error::Structure {
                date,
                message: format!("expected {HOURS} hourly records, found {present}"),
            });
        }
        for h in 0..HOURS {
            let vals = match rows.and_then(|r| r[h]) {
                Some(v) => v,
                None => prev.ok_or_else(|| Error::Structure {
                    date,
                    message: format!("hour {h} missing and nothing to fill from"),
                })?,
            };
            for (p, v) in panels.iter_mut().zip(vals) {
                p[[d, h]] = v;
            }
            prev = Some(vals);
        }
    }
    let [price, load, wind, pv] = panels;
    MarketDataset::new(first, price, load, wind, pv)
}

/// Point forecasts of `M` expert models for the 24 hours of one day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleForecast {
    pub day: NaiveDate,
    /// `D × M`, column `m` holds model `m`'s forecast.
    pub values: Array2<f64>,
    pub model_names: Vec<String>,
}

impl EnsembleForecast {
    pub fn new(day: NaiveDate, values: Array2<f64>, model_names: Vec<String>) -> Result<Self> {
        if values.nrows() != HOURS {
            return Err(Error::Dimension {
                expected: HOURS,
                actual: values.nrows(),
            });
        }
        if values.ncols() < 2 {
            return Err(Error::invalid("an ensemble needs at least two members"));
        }
        if model_names.len() != values.ncols() {
            return Err(Error::Dimension {
                expected: values.ncols(),
                actual: model_names.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("ensemble forecast for {day}")));
        }
        Ok(Self {
            day,
            values,
            model_names,
        })
    }

    pub fn n_members(&self) -> usize {
        self.values.ncols()
    }

    /// Simple average of the members per hour.
    pub fn mean(&self) -> Vec<f64> {
        self.values
            .rows()
            .into_iter()
            .map(|r| r.sum() / r.len() as f64)
            .collect()
    }
}

/// `S × D` joint scenarios for one day, in EUR/MWh.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    pub day: NaiveDate,
    pub scenarios: Array2<f64>,
}

impl ScenarioSet {
    pub fn new(day: NaiveDate, scenarios: Array2<f64>) -> Result<Self> {
        if scenarios.nrows() == 0 {
            return Err(Error::invalid("a scenario set needs at least one scenario"));
        }
        if scenarios.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("scenario set for {day}")));
        }
        Ok(Self { day, scenarios })
    }

    pub fn n_scenarios(&self) -> usize {
        self.scenarios.nrows()
    }

    /// Per-dimension mean over scenarios.
    pub fn mean(&self) -> Vec<f64> {
        let s = self.n_scenarios() as f64;
        self.scenarios.columns().into_iter().map(|c| c.sum() / s).collect()
    }

    /// Writes one scenario per row with columns `h1..hD`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let io = |e| Error::io(path, e);
        let header: Vec<String> = (1..=self.scenarios.ncols()).map(|h| format!("h{h}")).collect();
        writeln!(w, "{}", header.join(",")).map_err(io)?;
        for row in self.scenarios.rows() {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", cells.join(",")).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn read_csv(day: NaiveDate, path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut rdr = csv::Reader::from_reader(file);
        let d = rdr.headers()?.len();
        let mut flat = Vec::new();
        let mut rows = 0;
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            for f in rec.iter() {
                flat.push(f.parse::<f64>().map_err(|e| Error::Parse {
                    line,
                    message: e.to_string(),
                })?);
            }
            rows += 1;
        }
        let scenarios = Array2::from_shape_vec((rows, d), flat)
            .map_err(|e| Error::invalid(format!("ragged scenario file: {e}")))?;
        Self::new(day, scenarios)
    }
}

/// Affine standardisation with one pooled mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: f64,
    pub std: f64,
}

impl Standardizer {
    pub fn fit(values: &[f64]) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::invalid("standardizer needs at least two values"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("standardizer input".into()));
        }
        let mean = crate::stats::mean(values);
        let std = crate::stats::population_std(values);
        if !(std > 0.0) {
            return Err(Error::invalid("standardizer input has zero variance"));
        }
        Ok(Self { mean, std })
    }

    pub fn apply(&self, v: f64) -> f64 {
        (v - self.mean) / self.std
    }

    pub fn invert(&self, v: f64) -> f64 {
        v * self.std + self.mean
    }
}

pub fn asinh_transform(y: f64) -> f64 {
    y.asinh()
}

pub fn sinh_inverse(t: f64) -> f64 {
    t.sinh()
}
