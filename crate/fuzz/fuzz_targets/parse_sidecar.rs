#![no_main]

use balance_core::ingest::parse_sidecar;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = parse_sidecar(data);
});
