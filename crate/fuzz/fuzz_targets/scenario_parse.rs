#![no_main]

use libfuzzer_sys::fuzz_target;
use smooth_smc::scenario::ScenarioConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(cfg) = ScenarioConfig::parse(data) {
        let _ = cfg.build();
    }
});
