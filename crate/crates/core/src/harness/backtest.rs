use std::collections::BTreeMap;
use std::ops::Range;
use std::path::{Path, PathBuf};

use ndarray::{Array2, Axis};
use rayon::prelude::*;
use serde::Serialize;

use super::config::{BacktestConfig, DataSource, Method};
use super::plot::plot_scenarios;
use super::report::{MethodScores, RepeatScores, ScoreReport};
use super::synthetic::generate_synthetic;
use crate::baselines::{
    copula_sample, fit_gaussian_copula, fit_mge, fit_ngr, fit_qra, igep_independent, pit_values,
    raw_ensemble_scenarios, sample_mge, CopulaModel, MarginalForecast, MgeModel, NgrMethod, NgrParams, QraModel,
};
use crate::data::{ingest_csv, EnsembleForecast, MarketDataset, ScenarioSet, Standardizer};
use crate::ensemble::{rolling_forecast, RollingForecasts};
use crate::igep::TrainedGenerator;
use crate::rng::{derive_seed, seeded, Rng};
use crate::scoring::{energy_score, mean_marginal_crps, ScoringConfig};
use crate::{Error, Result, HOURS};

pub fn load_dataset(cfg: &BacktestConfig) -> Result<MarketDataset> {
    match &cfg.data {
        DataSource::Synthetic(s) => generate_synthetic(s),
        DataSource::Csv { path, schema, missing } => ingest_csv(path, schema, *missing),
    }
    .map_err(|e| e.in_stage("data", None))
}

/// Dataset day indices of the first probabilistic-training day, the first
/// test day and one past the last test day.
pub fn split_indices(cfg: &BacktestConfig, dataset: &MarketDataset) -> Result<(usize, usize, usize)> {
    let idx = |d| {
        dataset
            .day_index(d)
            .ok_or_else(|| Error::invalid(format!("split date {d} is outside the dataset")).in_stage("data", Some(d)))
    };
    let s = &cfg.splits;
    Ok((idx(s.prob_train_start)?, idx(s.test_start)?, idx(s.test_end)? + 1))
}

/// Rolling expert forecasts for the probabilistic-training and test periods.
pub fn run_ensemble(cfg: &BacktestConfig, dataset: &MarketDataset) -> Result<RollingForecasts> {
    let (p0, _, end) = split_indices(cfg, dataset)?;
    rolling_forecast(dataset, &cfg.experts, &cfg.rolling, p0, end).map_err(|e| match e {
        Error::Stage { .. } => e,
        other => other.in_stage("ensemble", None),
    })
}

/// A fitted probabilistic model that needs no further randomness to train.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Prepared {
    Raw,
    Mge {
        standardizer: Standardizer,
        model: MgeModel,
    },
    QraCopula {
        standardizer: Standardizer,
        marginals: QraModel,
        copula: CopulaModel,
    },
    NgrCopula {
        standardizer: Standardizer,
        marginals: NgrParams,
        copula: CopulaModel,
    },
    Igep(#[serde(skip)] Box<TrainedGenerator>),
}

impl Prepared {
    fn sample(&self, forecast: &EnsembleForecast, s: usize, rng: &mut Rng) -> Result<Array2<f64>> {
        let standardized = |st: &Standardizer| forecast.values.mapv(|v| st.apply(v));
        let invert = |st: &Standardizer, a: Array2<f64>| a.mapv(|v| st.invert(v));
        match self {
            Prepared::Raw => Ok(raw_ensemble_scenarios(forecast)?.scenarios),
            Prepared::Mge { standardizer, model } => {
                let xbar: Vec<f64> = standardized(standardizer).mean_axis(Axis(1)).unwrap().to_vec();
                Ok(invert(standardizer, sample_mge(model, &xbar, s, rng)?))
            }
            Prepared::QraCopula {
                standardizer,
                marginals,
                copula,
            } => {
                let m = marginals.marginals(standardized(standardizer).view())?;
                Ok(invert(standardizer, copula_sample(&m, copula, s, rng)?))
            }
            Prepared::NgrCopula {
                standardizer,
                marginals,
                copula,
            } => {
                let m = marginals.marginals(standardized(standardizer).view())?;
                Ok(invert(standardizer, copula_sample(&m, copula, s, rng)?))
            }
            Prepared::Igep(g) => Ok(g.predict(forecast, s, rng)?.scenarios),
        }
    }
}

/// Standardized ensembles and `N × D` realised prices of a training period.
struct TrainingSet {
    standardizer: Standardizer,
    forecasts: Vec<Array2<f64>>,
    actuals: Array2<f64>,
}

impl TrainingSet {
    fn new(data: &RollingForecasts) -> Result<Self> {
        let all: Vec<f64> = data.actuals.iter().flatten().copied().collect();
        let standardizer = Standardizer::fit(&all)?;
        let forecasts = data.forecasts.iter().map(|f| f.values.mapv(|v| standardizer.apply(v))).collect();
        let actuals = Array2::from_shape_fn((data.len(), HOURS), |(i, h)| standardizer.apply(data.actuals[i][h]));
        Ok(Self {
            standardizer,
            forecasts,
            actuals,
        })
    }

    fn copula_for(&self, marginals: impl Fn(&Array2<f64>) -> Result<Vec<MarginalForecast>>) -> Result<CopulaModel> {
        let m = self.forecasts.iter().map(marginals).collect::<Result<Vec<_>>>()?;
        fit_gaussian_copula(pit_values(&m, self.actuals.view())?.view())
    }
}

fn prepare(method: Method, train: &RollingForecasts, cfg: &BacktestConfig, seed: u64) -> Result<Prepared> {
    Ok(match method {
        Method::Raw => Prepared::Raw,
        Method::Igep | Method::IgepInd => {
            let base = if method == Method::Igep {
                cfg.igep
            } else {
                igep_independent(&cfg.igep)
            };
            let tc = crate::igep::TrainConfig { seed, ..base };
            Prepared::Igep(Box::new(TrainedGenerator::fit(&train.forecasts, &train.actuals, &tc)?))
        }
        Method::Mge => {
            let ts = TrainingSet::new(train)?;
            let mut resid = ts.actuals.clone();
            for (mut row, x) in resid.rows_mut().into_iter().zip(&ts.forecasts) {
                row -= &x.mean_axis(Axis(1)).unwrap();
            }
            Prepared::Mge {
                standardizer: ts.standardizer,
                model: fit_mge(resid.view())?,
            }
        }
        Method::QraCopula => {
            let ts = TrainingSet::new(train)?;
            let marginals = fit_qra(&ts.forecasts, ts.actuals.view(), &cfg.taus)?;
            let copula = ts.copula_for(|x| marginals.marginals(x.view()))?;
            Prepared::QraCopula {
                standardizer: ts.standardizer,
                marginals,
                copula,
            }
        }
        Method::NgrMlCopula | Method::NgrCrpsCopula => {
            let ts = TrainingSet::new(train)?;
            let how = if method == Method::NgrMlCopula {
                NgrMethod::Ml
            } else {
                NgrMethod::Crps
            };
            let marginals = fit_ngr(&ts.forecasts, ts.actuals.view(), how)?;
            let copula = ts.copula_for(|x| marginals.marginals(x.view()))?;
            Prepared::NgrCopula {
                standardizer: ts.standardizer,
                marginals,
                copula,
            }
        }
    })
}

/// Training and evaluation ranges, as indices into the rolling forecasts.
#[derive(Debug, Clone, PartialEq)]
struct Block {
    train: Range<usize>,
    test: Range<usize>,
}

fn fit_blocks(n_train: usize, n_total: usize, refit_every: Option<usize>) -> Vec<Block> {
    match refit_every {
        None => vec![Block {
            train: 0..n_train,
            test: n_train..n_total,
        }],
        Some(k) => (n_train..n_total)
            .step_by(k)
            .map(|b| Block {
                train: b - n_train..b,
                test: b..(b + k).min(n_total),
            })
            .collect(),
    }
}

/// Scores of one scenario set against the realised prices.
#[derive(Debug, Clone, Copy)]
struct DayScore {
    es: f64,
    crps: f64,
    sq_err: f64,
}

fn score_day(scen: &Array2<f64>, actual: &[f64], scoring: &ScoringConfig) -> Result<DayScore> {
    let es = energy_score(scen.view(), actual, scoring)?;
    let crps = mean_marginal_crps(scen.view(), actual, scoring)?;
    let mean = scen.mean_axis(Axis(0)).unwrap();
    let sq_err = mean.iter().zip(actual).map(|(m, a)| (m - a) * (m - a)).sum();
    Ok(DayScore { es, crps, sq_err })
}

fn aggregate(days: &[DayScore]) -> RepeatScores {
    let n = days.len() as f64;
    RepeatScores {
        es: days.iter().map(|d| d.es).sum::<f64>() / n,
        crps: days.iter().map(|d| d.crps).sum::<f64>() / n,
        rmse: (days.iter().map(|d| d.sq_err).sum::<f64>() / (n * HOURS as f64)).sqrt(),
    }
}

/// Everything produced by a backtest.
#[derive(Debug, Clone)]
pub struct BacktestOutput {
    pub report: ScoreReport,
    /// Per-repeat scores, in the order of the configured methods.
    pub repeats: Vec<(Method, Vec<RepeatScores>)>,
    pub run_dir: PathBuf,
}

struct Job {
    method: Method,
    repeat: usize,
}

struct JobResult {
    scores: RepeatScores,
    plots: Vec<(usize, Array2<f64>)>,
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Runs the full pipeline: ensemble forecasts, probabilistic model fits,
/// scenario generation and scoring on the test period, writing all
/// artefacts below the run directory.
pub fn run_backtest(cfg: &BacktestConfig) -> Result<BacktestOutput> {
    cfg.validate().map_err(|e| e.in_stage("config", None))?;
    let dataset = load_dataset(cfg)?;
    let rolling = run_ensemble(cfg, &dataset)?;
    backtest_with_forecasts(cfg, &dataset, &rolling)
}

/// The backtest after the ensemble stage, for callers that already hold the
/// rolling forecasts of [`run_ensemble`].
pub fn backtest_with_forecasts(
    cfg: &BacktestConfig,
    dataset: &MarketDataset,
    rolling: &RollingForecasts,
) -> Result<BacktestOutput> {
    cfg.validate().map_err(|e| e.in_stage("config", None))?;
    let (p0, t0, end) = split_indices(cfg, dataset)?;
    if rolling.len() != end - p0 || rolling.forecasts.first().map(|f| f.day) != Some(dataset.date(p0)) {
        return Err(Error::invalid("rolling forecasts do not cover the configured periods").in_stage("ensemble", None));
    }
    let run_dir = cfg.run_dir();
    let write = |e: Error| e.in_stage("write", None);
    create_dir(&run_dir).map_err(write)?;
    std::fs::write(run_dir.join("config.json"), cfg.to_json().map_err(write)?)
        .map_err(|e| write(Error::io(run_dir.join("config.json"), e)))?;
    rolling.write_csv(&run_dir.join("ensemble.csv")).map_err(write)?;

    let blocks = fit_blocks(t0 - p0, end - p0, cfg.prob_refit_every);
    let plot_days: Vec<usize> = if cfg.plot_days.is_empty() {
        vec![t0 - p0]
    } else {
        cfg.plot_days
            .iter()
            .map(|d| {
                rolling
                    .days()
                    .iter()
                    .position(|x| x == d)
                    .filter(|&i| i >= t0 - p0)
                    .ok_or_else(|| Error::invalid(format!("plot day {d} is not a test day")).in_stage("config", Some(*d)))
            })
            .collect::<Result<_>>()?
    };

    // deterministic fits are shared by all repeats
    let det_keys: Vec<(Method, usize)> = cfg
        .methods
        .iter()
        .filter(|m| !m.is_stochastic_fit())
        .flat_map(|&m| (0..blocks.len()).map(move |b| (m, b)))
        .collect();
    let det: BTreeMap<(Method, usize), Prepared> = det_keys
        .par_iter()
        .map(|&(m, b)| {
            let train = rolling.slice(blocks[b].train.clone());
            let day = rolling.forecasts[blocks[b].test.start].day;
            prepare(m, &train, cfg, 0).map(|p| ((m, b), p)).map_err(|e| e.in_stage("fit", Some(day)))
        })
        .collect::<Result<_>>()?;

    let scen_dir = run_dir.join("scenarios");
    if cfg.write_scenarios {
        for m in &cfg.methods {
            create_dir(&scen_dir.join(m.id())).map_err(write)?;
        }
    }

    let jobs: Vec<Job> = cfg
        .methods
        .iter()
        .flat_map(|&method| (0..cfg.repeats).map(move |repeat| Job { method, repeat }))
        .collect();
    let igep_models: Vec<Option<Prepared>> = jobs
        .par_iter()
        .map(|job| {
            if !job.method.is_stochastic_fit() {
                return Ok(None);
            }
            // only the first block's model is kept for export; others are refit on the fly
            let seed = derive_seed(cfg.seed, &[job.method.seed_index(), job.repeat as u64, 0, 0]);
            let train = rolling.slice(blocks[0].train.clone());
            let day = rolling.forecasts[blocks[0].test.start].day;
            prepare(job.method, &train, cfg, seed)
                .map(Some)
                .map_err(|e| e.in_stage("fit", Some(day)))
        })
        .collect::<Result<_>>()?;

    let results: Vec<JobResult> = jobs
        .par_iter()
        .zip(&igep_models)
        .map(|(job, first_model)| {
            let m_idx = job.method.seed_index();
            let r = job.repeat as u64;
            let mut days = Vec::with_capacity(end - t0);
            let mut plots = Vec::new();
            for (b, block) in blocks.iter().enumerate() {
                let refit;
                let model: &Prepared = if job.method.is_stochastic_fit() {
                    if b == 0 {
                        first_model.as_ref().unwrap()
                    } else {
                        let seed = derive_seed(cfg.seed, &[m_idx, r, 0, b as u64]);
                        let day = rolling.forecasts[block.test.start].day;
                        refit = prepare(job.method, &rolling.slice(block.train.clone()), cfg, seed)
                            .map_err(|e| e.in_stage("fit", Some(day)))?;
                        &refit
                    }
                } else {
                    &det[&(job.method, b)]
                };
                for i in block.test.clone() {
                    let f = &rolling.forecasts[i];
                    let mut rng = seeded(derive_seed(cfg.seed, &[m_idx, r, 1, (p0 + i) as u64]));
                    let scen = model
                        .sample(f, cfg.scenarios, &mut rng)
                        .map_err(|e| e.in_stage("sample", Some(f.day)))?;
                    days.push(score_day(&scen, &rolling.actuals[i], &cfg.scoring).map_err(|e| e.in_stage("score", Some(f.day)))?);
                    if job.repeat == 0 {
                        if cfg.write_scenarios {
                            let path = scen_dir.join(job.method.id()).join(format!("{}.csv", f.day));
                            ScenarioSet::new(f.day, scen.clone())
                                .and_then(|s| s.write_csv(&path))
                                .map_err(|e| e.in_stage("write", Some(f.day)))?;
                        }
                        if plot_days.contains(&i) {
                            plots.push((i, scen));
                        }
                    }
                }
            }
            Ok(JobResult {
                scores: aggregate(&days),
                plots,
            })
        })
        .collect::<Result<_>>()?;

    let mut repeats: Vec<(Method, Vec<RepeatScores>)> = cfg.methods.iter().map(|&m| (m, Vec::new())).collect();
    for (job, res) in jobs.iter().zip(&results) {
        let slot = repeats.iter_mut().find(|(m, _)| *m == job.method).unwrap();
        slot.1.push(res.scores);
    }
    let test = rolling.slice(t0 - p0..end - p0);
    let report = ScoreReport {
        methods: repeats.iter().map(|(m, r)| MethodScores::from_repeats(*m, r)).collect(),
        experts: test.point_errors(),
    };
    report.write_csv(&run_dir.join("report.csv")).map_err(write)?;
    std::fs::write(run_dir.join("report.txt"), report.to_text())
        .map_err(|e| write(Error::io(run_dir.join("report.txt"), e)))?;

    // fan charts use the first configured method, preferring IGEP
    let plot_method = if cfg.methods.contains(&Method::Igep) {
        Method::Igep
    } else {
        cfg.methods[0]
    };
    let plot_job = jobs.iter().position(|j| j.method == plot_method && j.repeat == 0).unwrap();
    if !results[plot_job].plots.is_empty() {
        create_dir(&run_dir.join("plots")).map_err(write)?;
    }
    for (i, scen) in &results[plot_job].plots {
        let f = &rolling.forecasts[*i];
        plot_scenarios(scen.view(), f, &rolling.actuals[*i], &run_dir.join("plots").join(format!("{}.svg", f.day)))
            .map_err(|e| e.in_stage("plot", Some(f.day)))?;
    }

    if cfg.write_models {
        let dir = run_dir.join("models");
        create_dir(&dir).map_err(write)?;
        for (job, model) in jobs.iter().zip(&igep_models) {
            if let (0, Some(Prepared::Igep(g))) = (job.repeat, model) {
                g.save(&dir.join(format!("{}.json", job.method.id()))).map_err(write)?;
            }
        }
        for ((m, b), model) in &det {
            if *b == 0 && !matches!(model, Prepared::Raw) {
                let path = dir.join(format!("{}.json", m.id()));
                let json = serde_json::to_string_pretty(model).map_err(|e| write(e.into()))?;
                std::fs::write(&path, json).map_err(|e| write(Error::io(&path, e)))?;
            }
        }
    }
    log::info!("backtest written to {}", run_dir.display());
    Ok(BacktestOutput {
        report,
        repeats,
        run_dir,
    })
}

/// Recomputes the scores of the scenario CSVs of a finished run from
/// `ensemble.csv`, as a single repeat per method.
pub fn rescore_run(run_dir: &Path, scoring: &ScoringConfig) -> Result<ScoreReport> {
    let rolling = RollingForecasts::read_csv(&run_dir.join("ensemble.csv")).map_err(|e| e.in_stage("score", None))?;
    let days = rolling.days();
    let scen_dir = run_dir.join("scenarios");
    let mut entries: Vec<PathBuf> = std::fs::read_dir(&scen_dir)
        .map_err(|e| Error::io(&scen_dir, e).in_stage("score", None))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    entries.sort();
    let mut ordered: Vec<(Method, PathBuf)> = entries
        .into_iter()
        .map(|p| {
            let id = p.file_name().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            Method::from_id(&id).map(|m| (m, p))
        })
        .collect::<Result<_>>()
        .map_err(|e| e.in_stage("score", None))?;
    ordered.sort_by_key(|(m, _)| m.seed_index());
    let mut methods = Vec::new();
    let mut scored_days = Vec::new();
    for (method, dir) in ordered {
        let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
            .map_err(|e| Error::io(&dir, e).in_stage("score", None))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        files.sort();
        let mut per_day = Vec::with_capacity(files.len());
        for path in files {
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
            let date = chrono::NaiveDate::parse_from_str(stem, "%Y-%m-%d")
                .map_err(|e| Error::invalid(format!("{}: {e}", path.display())).in_stage("score", None))?;
            let i = days
                .iter()
                .position(|d| *d == date)
                .ok_or_else(|| Error::invalid("day missing from ensemble.csv").in_stage("score", Some(date)))?;
            let set = ScenarioSet::read_csv(date, &path).map_err(|e| e.in_stage("score", Some(date)))?;
            per_day.push(score_day(&set.scenarios, &rolling.actuals[i], scoring).map_err(|e| e.in_stage("score", Some(date)))?);
            if !scored_days.contains(&i) {
                scored_days.push(i);
            }
        }
        if per_day.is_empty() {
            continue;
        }
        methods.push(MethodScores::from_repeats(method, &[aggregate(&per_day)]));
    }
    scored_days.sort_unstable();
    let subset = RollingForecasts {
        forecasts: scored_days.iter().map(|&i| rolling.forecasts[i].clone()).collect(),
        actuals: scored_days.iter().map(|&i| rolling.actuals[i].clone()).collect(),
    };
    Ok(ScoreReport {
        methods,
        experts: if subset.is_empty() { Vec::new() } else { subset.point_errors() },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blocks_cover_the_test_period() {
        let single = fit_blocks(365, 730, None);
        assert_eq!(single, vec![Block { train: 0..365, test: 365..730 }]);
        let weekly = fit_blocks(365, 730, Some(7));
        assert_eq!(weekly.len(), 53);
        assert_eq!(weekly[1], Block { train: 7..372, test: 372..379 });
        assert_eq!(weekly.last().unwrap().test, 729..730);
    }
}
