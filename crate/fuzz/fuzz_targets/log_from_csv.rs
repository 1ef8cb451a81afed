#![no_main]

use libfuzzer_sys::fuzz_target;
use smooth_smc::log::TrajectoryLog;

fuzz_target!(|data: &[u8]| {
    if let Ok(log) = TrajectoryLog::from_csv(data) {
        let again = TrajectoryLog::from_csv(log.to_csv().as_bytes()).expect("own output parses");
        assert_eq!(again.len(), log.len());
    }
});
