use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_electrolyzer-sched"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// The first day of the bundled week, to keep solves short.
fn one_day(dir: &Path) -> PathBuf {
    let week =
        fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/demo_week_synthetic.csv")).unwrap();
    let day: Vec<&str> = week.lines().take(25).collect();
    let path = dir.join("day.csv");
    fs::write(&path, day.join("\n")).unwrap();
    path
}

#[test]
fn fit_curve_writes_segments() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("pwl.csv");
    let o = run(&["fit-curve", "--segments", "8", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("max underestimate"));
    let text = fs::read_to_string(out).unwrap();
    assert_eq!(text.lines().count(), 9);
}

#[test]
fn fit_curve_rejects_bad_parameters() {
    let o = run(&["fit-curve", "--beta", "-1"]);
    assert!(!o.status.success());
}

#[test]
fn schedule_writes_outputs() {
    let dir = TempDir::new().unwrap();
    let market = one_day(dir.path());
    let out = dir.path().join("out");
    let o = run(&[
        "schedule",
        "--market",
        market.to_str().unwrap(),
        "--modules",
        "2",
        "--capacity",
        "50",
        "--segments",
        "8",
        "--format",
        "json",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let metrics = fs::read_to_string(out.join("m2_s8_metrics.json")).unwrap();
    assert!(metrics.contains("total_revenue_usd"));
    assert!(out.join("m2_s8_schedule.json").exists());
}

#[test]
fn schedule_reads_config_and_splits_days() {
    let dir = TempDir::new().unwrap();
    let market = one_day(dir.path());
    let config = dir.path().join("s.toml");
    fs::write(
        &config,
        "name = \"cfg\"\nmodules = 2\nmodule_capacity_mw = 50.0\nsegments = 8\nmarket_file = \"day.csv\"\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = run(&["schedule", "--config", config.to_str().unwrap(), "--day-split", "--out-dir", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let schedule = fs::read_to_string(out.join("cfg_schedule.csv")).unwrap();
    assert!(schedule.starts_with("hour,p_grid_mw,p_e_total_mw,p_e_m0_mw"));
    assert_eq!(schedule.lines().count(), 25);
    assert!(market.exists());
}

#[test]
fn compare_and_hour_detail() {
    let dir = TempDir::new().unwrap();
    let market = one_day(dir.path());
    let out = dir.path().join("out");
    let m = market.to_str().unwrap();
    let o = run(&[
        "compare",
        "--market",
        m,
        "--module-counts",
        "1,2",
        "--segment-counts",
        "8",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("comparison_s8.csv").exists());

    let o = run(&["hour-detail", "--hour", "5", "--market", m, "--module-counts", "1,2", "--segment-counts", "8"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(&["hour-detail", "--hour", "99", "--market", m, "--module-counts", "1", "--segment-counts", "8"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("hour 99"));
}

#[test]
fn bad_market_file_fails() {
    let dir = TempDir::new().unwrap();
    let market = dir.path().join("bad.csv");
    fs::write(&market, "hour,bid_price_usd_mwh\n0,x\n").unwrap();
    let o = run(&["schedule", "--market", market.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.csv"));
}

#[test]
fn unknown_config_keys_fail() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("s.toml");
    fs::write(&config, "modules = 2\nmodle_capacity = 3\n").unwrap();
    let o = run(&["schedule", "--config", config.to_str().unwrap()]);
    assert!(!o.status.success());
}
