//! Replays the checked-in fuzz corpus through the parsers so regressions
//! show up without a fuzzing toolchain.

use std::fs;
use std::path::PathBuf;

use electrolyzer_sched::curve::{fit_concave_pwl, load_curve_points};
use electrolyzer_sched::market::parse_market_csv;
use electrolyzer_sched::scenario::ScenarioConfig;

fn corpus(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut files: Vec<_> =
        fs::read_dir(&dir).unwrap_or_else(|e| panic!("{}: {e}", dir.display())).map(|e| e.unwrap().path()).collect();
    files.sort();
    assert!(!files.is_empty(), "empty corpus {}", dir.display());
    files.into_iter().map(|p| (p.clone(), fs::read(p).unwrap())).collect()
}

#[test]
fn market_corpus() {
    let ok = corpus("market_csv").into_iter().filter(|(_, d)| parse_market_csv(d.as_slice()).is_ok()).count();
    assert!(ok >= 1);
}

#[test]
fn curve_corpus() {
    let mut ok = 0;
    for (_, data) in corpus("curve_csv") {
        if let Ok(curve) = load_curve_points(data.as_slice()) {
            let _ = fit_concave_pwl(&curve, 8, 1.0);
            ok += 1;
        }
    }
    assert!(ok >= 1);
}

#[test]
fn scenario_corpus() {
    for (path, data) in corpus("scenario_config") {
        let text = String::from_utf8(data).unwrap();
        let config = ScenarioConfig::from_toml(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        config.fleet().validate().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}
