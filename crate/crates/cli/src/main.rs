use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use igep_core::data::ScenarioSet;
use igep_core::ensemble::{format_point_errors, RollingForecasts};
use igep_core::harness::{
    load_dataset, plot_scenarios, rescore_run, run_backtest, run_ensemble, BacktestConfig, DataSource, Method,
};

#[derive(Parser)]
#[command(name = "igep", version, about = "Ensemble post-processing and scenario generation for day-ahead prices")]
struct Cli {
    /// JSON backtest configuration; defaults apply to missing fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the base seed (and the synthetic data seed for `synth`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic market dataset as CSV.
    Synth,
    /// Rolling expert point forecasts and their error table.
    Ensemble,
    /// Full pipeline: ensemble, probabilistic models, scores, scenarios, plots.
    Backtest,
    /// Fan chart of one day of a finished run.
    Plot {
        #[arg(long)]
        run: PathBuf,
        /// Day to draw, YYYY-MM-DD.
        #[arg(long)]
        date: chrono::NaiveDate,
        #[arg(long, default_value = "igep")]
        method: String,
    },
    /// Re-score the scenario CSVs of a finished run.
    Score {
        #[arg(long)]
        run: PathBuf,
    },
}

fn load_config(cli: &Cli) -> anyhow::Result<BacktestConfig> {
    let mut cfg = match &cli.config {
        Some(p) => BacktestConfig::load(p).with_context(|| format!("stage `config`: reading {}", p.display()))?,
        None => BacktestConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn create_dir(path: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = load_config(&cli)?;
    match &cli.command {
        Command::Synth => {
            if let (Some(seed), DataSource::Synthetic(s)) = (cli.seed, &mut cfg.data) {
                s.seed = seed;
            }
            let ds = load_dataset(&cfg)?;
            create_dir(&cfg.output_dir)?;
            let path = cfg.output_dir.join("synthetic.csv");
            ds.write_csv(&path)?;
            println!("wrote {} days to {}", ds.n_days(), path.display());
        }
        Command::Ensemble => {
            cfg.validate()?;
            let ds = load_dataset(&cfg)?;
            let rolling = run_ensemble(&cfg, &ds)?;
            let dir = cfg.run_dir();
            create_dir(&dir)?;
            rolling.write_csv(&dir.join("ensemble.csv"))?;
            println!("{}", format_point_errors(&rolling.point_errors()));
            println!("wrote {}", dir.join("ensemble.csv").display());
        }
        Command::Backtest => {
            let out = run_backtest(&cfg)?;
            print!("{}", out.report.to_text());
            println!("results in {}", out.run_dir.display());
        }
        Command::Plot { run, date, method } => {
            let method = Method::from_id(method)?;
            let rolling = RollingForecasts::read_csv(&run.join("ensemble.csv"))?;
            let i = rolling
                .days()
                .iter()
                .position(|d| d == date)
                .with_context(|| format!("stage `plot` failed on {date}: day not in ensemble.csv"))?;
            let scen_path = run.join("scenarios").join(method.id()).join(format!("{date}.csv"));
            let set = ScenarioSet::read_csv(*date, &scen_path)
                .map_err(|e| e.in_stage("plot", Some(*date)))?;
            let dir = cli.out.clone().unwrap_or_else(|| run.join("plots"));
            create_dir(&dir)?;
            let path = dir.join(format!("{date}.svg"));
            plot_scenarios(set.scenarios.view(), &rolling.forecasts[i], &rolling.actuals[i], &path)
                .map_err(|e| e.in_stage("plot", Some(*date)))?;
            println!("wrote {}", path.display());
        }
        Command::Score { run } => {
            let report = rescore_run(run, &cfg.scoring)?;
            print!("{}", report.to_text());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
