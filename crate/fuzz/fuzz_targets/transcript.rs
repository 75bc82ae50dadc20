#![no_main]

use libfuzzer_sys::fuzz_target;
use oracle_arena::games::GameTranscript;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    let Ok(t) = GameTranscript::from_json(s) else { return };
    let _ = t.recheck();
    let _ = t.is_win();
    let _ = GameTranscript::from_json(&t.to_json());
});
