#![no_main]

use electrolyzer_sched::scenario::ScenarioConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(config) = ScenarioConfig::from_toml(text) {
            let _ = config.fleet().validate();
        }
    }
});
