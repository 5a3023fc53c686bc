use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::synthetic::SyntheticConfig;
use crate::data::{CsvSchema, MissingPolicy};
use crate::ensemble::{default_experts, ExpertSpec, RollingConfig};
use crate::igep::TrainConfig;
use crate::scoring::ScoringConfig;
use crate::{Error, Result};

/// Probabilistic forecasting methods compared in the backtest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Igep,
    Raw,
    Mge,
    IgepInd,
    QraCopula,
    NgrMlCopula,
    NgrCrpsCopula,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Igep,
        Method::Raw,
        Method::Mge,
        Method::IgepInd,
        Method::QraCopula,
        Method::NgrMlCopula,
        Method::NgrCrpsCopula,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Method::Igep => "igep",
            Method::Raw => "raw",
            Method::Mge => "mge",
            Method::IgepInd => "igep_ind",
            Method::QraCopula => "qra_copula",
            Method::NgrMlCopula => "ngr_ml_copula",
            Method::NgrCrpsCopula => "ngr_crps_copula",
        }
    }

    pub fn from_id(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.id() == s)
            .ok_or_else(|| Error::invalid(format!("unknown method `{s}`")))
    }

    /// Stable index used to derive per-method seeds.
    pub fn seed_index(self) -> u64 {
        Self::ALL.iter().position(|m| *m == self).unwrap() as u64
    }

    /// Whether training involves randomness (sampling still does for all but `raw`).
    pub fn is_stochastic_fit(self) -> bool {
        matches!(self, Method::Igep | Method::IgepInd)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSource {
    Synthetic(SyntheticConfig),
    Csv {
        path: PathBuf,
        #[serde(default)]
        schema: CsvSchema,
        #[serde(default)]
        missing: MissingPolicy,
    },
}

/// First days of the three consecutive periods, plus the last test day
/// (inclusive). The ensemble-training period starts with the dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub prob_train_start: NaiveDate,
    pub test_start: NaiveDate,
    pub test_end: NaiveDate,
}

impl Splits {
    /// Three consecutive 365-day periods from `start`.
    pub fn consecutive_years(start: NaiveDate) -> Self {
        let day = |n: u64| start + chrono::Days::new(n);
        Self {
            prob_train_start: day(365),
            test_start: day(730),
            test_end: day(1094),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BacktestConfig {
    pub data: DataSource,
    pub splits: Splits,
    pub methods: Vec<Method>,
    /// Scenarios per test day.
    pub scenarios: usize,
    pub repeats: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Name of the run directory; defaults to `run-<seed>`.
    pub run_id: Option<String>,
    pub experts: Vec<ExpertSpec>,
    pub rolling: RollingConfig,
    pub igep: TrainConfig,
    /// Quantile levels for QRA.
    pub taus: Vec<f64>,
    /// Refit the probabilistic models every `k` test days on the trailing
    /// window of the same length as the probabilistic-training period.
    /// `None` trains once.
    pub prob_refit_every: Option<usize>,
    pub scoring: ScoringConfig,
    /// Write per-day scenario CSVs (first repeat only).
    pub write_scenarios: bool,
    /// Test days to draw fan charts for; empty plots the first test day.
    pub plot_days: Vec<NaiveDate>,
    pub write_models: bool,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        let synth = SyntheticConfig::default();
        let splits = Splits::consecutive_years(synth.start);
        Self {
            data: DataSource::Synthetic(synth),
            splits,
            methods: Method::ALL.to_vec(),
            scenarios: 1000,
            repeats: 10,
            seed: 2024,
            output_dir: PathBuf::from("out"),
            run_id: None,
            experts: default_experts(),
            rolling: RollingConfig::default(),
            igep: TrainConfig::default(),
            taus: crate::baselines::default_taus(),
            prob_refit_every: None,
            scoring: ScoringConfig::default(),
            write_scenarios: true,
            plot_days: Vec::new(),
            write_models: true,
        }
    }
}

impl BacktestConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn run_dir(&self) -> PathBuf {
        let id = self.run_id.clone().unwrap_or_else(|| format!("run-{}", self.seed));
        self.output_dir.join(id)
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.splits;
        if !(s.prob_train_start < s.test_start && s.test_start <= s.test_end) {
            return Err(Error::invalid("splits must satisfy prob_train_start < test_start <= test_end"));
        }
        if self.repeats == 0 {
            return Err(Error::invalid("at least one repeat is required"));
        }
        if self.scenarios < 2 {
            return Err(Error::invalid("at least two scenarios per day are required"));
        }
        if self.methods.is_empty() {
            return Err(Error::invalid("no methods selected"));
        }
        let mut seen = self.methods.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.methods.len() {
            return Err(Error::invalid("methods must not repeat"));
        }
        if self.prob_refit_every == Some(0) {
            return Err(Error::invalid("refit cadence must be positive"));
        }
        self.igep.validate()?;
        self.scoring.validate()?;
        Ok(())
    }
}
