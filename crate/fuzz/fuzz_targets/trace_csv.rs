#![no_main]

use balance_core::plant::SimTrace;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(trace) = SimTrace::from_csv(text) {
        let _ = trace.episodes();
        let again = SimTrace::from_csv(&trace.to_csv()).expect("re-parse of written trace");
        assert_eq!(again.len(), trace.len());
    }
});
