#![no_main]

use balance_core::ingest::{parse_trial, write_trial, CopSource};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(trial) = parse_trial(data) {
        let _ = trial.cop_series(CopSource::Auto { min_load: 10.0 });
        // Anything accepted must survive a write/parse round trip.
        let again = parse_trial(write_trial(&trial).as_bytes()).expect("re-parse of written trial");
        assert_eq!(again.samples.len(), trial.samples.len());
    }
});
