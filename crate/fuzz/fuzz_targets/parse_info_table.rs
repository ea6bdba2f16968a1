#![no_main]

use balance_core::ingest::parse_info_table;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // First line picks the id, the rest is the table.
    let split = data.iter().position(|&b| b == b'\n').unwrap_or(data.len());
    let id = String::from_utf8_lossy(&data[..split]);
    let rest = data.get(split + 1..).unwrap_or(&[]);
    let _ = parse_info_table(rest, id.trim());
});
