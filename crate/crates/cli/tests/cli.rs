use std::path::Path;
use std::process::{Command, Output};

fn igep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_igep")).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// A backtest small enough for a test: 200 synthetic days, 60-day windows,
/// 20 test days.
fn write_config(dir: &Path) -> String {
    let json = r#"{
  "data": {"source": "synthetic", "n_days": 200},
  "splits": {"prob_train_start": "2015-03-02", "test_start": "2015-05-31", "test_end": "2015-06-19"},
  "methods": ["igep", "raw", "mge"],
  "scenarios": 100,
  "repeats": 1,
  "run_id": "cli",
  "rolling": {"window_days": 60, "refit_every": 20},
  "igep": {"epochs": 5}
}"#;
    let path = dir.join("config.json");
    std::fs::write(&path, json).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn synth_writes_a_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = igep(&["synth", "--out", out, "--seed", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("synthetic.csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().contains("price"));
    assert_eq!(lines.count(), 3 * 365 * 24);
}

#[test]
fn backtest_then_score_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    let o = igep(&["--config", &cfg, "--out", out, "backtest"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let printed = String::from_utf8_lossy(&o.stdout);
    assert!(printed.contains("ES") && printed.contains("AVG"), "{printed}");

    let run = dir.path().join("out/cli");
    let run = run.to_str().unwrap();
    let o = igep(&["score", "--run", run]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("ES"));

    let o = igep(&["plot", "--run", run, "--date", "2015-06-05", "--method", "mge"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("out/cli/plots/2015-06-05.svg").is_file());
}

#[test]
fn failures_exit_nonzero_with_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let o = igep(&["--config", "/nonexistent/config.json", "backtest"]);
    assert!(!o.status.success());
    let e = stderr(&o);
    assert!(e.starts_with("error:") && e.contains("config"), "{e}");

    // a 60-day window cannot fit before the 2015-02-01 start of the probabilistic period
    let cfg = write_config(dir.path());
    let text = std::fs::read_to_string(&cfg).unwrap().replace("2015-03-02", "2015-02-01");
    std::fs::write(&cfg, text).unwrap();
    let o = igep(&["--config", &cfg, "--out", dir.path().to_str().unwrap(), "ensemble"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("ensemble"), "{}", stderr(&o));

    let o = igep(&["plot", "--run", dir.path().to_str().unwrap(), "--date", "2015-01-01"]);
    assert!(!o.status.success());
}
