#![no_main]

use electrolyzer_sched::curve::{fit_concave_pwl, load_curve_points};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(curve) = load_curve_points(data) {
        // Fitting may reject the curve, but must not panic.
        let _ = fit_concave_pwl(&curve, 8, 1.0);
    }
});
