#![no_main]

use libfuzzer_sys::fuzz_target;
use oracle_arena::oracle::{read_event_log, write_event_log, EventRecord};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    for line in s.lines() {
        let _ = EventRecord::from_json_line(line);
    }
    if let Ok(events) = read_event_log(s) {
        let mut out = Vec::new();
        write_event_log(&events, &mut out).expect("write to vec");
        let text = String::from_utf8(out).expect("utf8");
        let _ = read_event_log(&text).expect("re-read");
    }
});
