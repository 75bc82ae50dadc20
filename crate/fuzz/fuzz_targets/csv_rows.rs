#![no_main]

use libfuzzer_sys::fuzz_target;
use oracle_arena::harness::parse_rows;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    let Ok(rows) = parse_rows(s) else { return };
    for r in &rows {
        let _ = r.extra();
    }
});
