#![no_main]

use balance_core::phase::{distance_to_conic, ConicMap};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(map) = serde_json::from_slice::<ConicMap>(data) {
        let _ = map.center();
        let _ = distance_to_conic([0.25, -0.5], &map, 1e-6);
    }
});
