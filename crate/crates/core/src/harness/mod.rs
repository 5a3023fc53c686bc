//! End-to-end backtesting: synthetic data, rolling ensemble forecasts,
//! probabilistic model fits over repeated seeds, scoring, reports and fan
//! charts.

mod backtest;
mod config;
mod plot;
mod report;
mod synthetic;

pub use backtest::{backtest_with_forecasts, load_dataset, rescore_run, run_backtest, run_ensemble, split_indices, BacktestOutput};
pub use config::{BacktestConfig, DataSource, Method, Splits};
pub use plot::{plot_scenarios, render_svg, scenario_range, MAX_DRAWN_SCENARIOS};
pub use report::{MethodScores, RepeatScores, ScoreReport, Summary};
pub use synthetic::{generate_synthetic, price_curve, SyntheticConfig};
