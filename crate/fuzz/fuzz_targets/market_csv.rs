#![no_main]

use electrolyzer_sched::market::parse_market_csv;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(series) = parse_market_csv(data) {
        for (a, p) in series.availabilities().iter().zip(series.prices()) {
            assert!(a.is_finite() && *a >= 0.0);
            assert!(p.is_finite());
        }
    }
});
