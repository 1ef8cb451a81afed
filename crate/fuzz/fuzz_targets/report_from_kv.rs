#![no_main]

use libfuzzer_sys::fuzz_target;
use smooth_smc::verify::ConvergenceReport;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(report) = ConvergenceReport::from_kv(text) {
            let _ = report.to_text();
            ConvergenceReport::from_kv(&report.to_kv()).expect("own output parses");
        }
    }
});
