#![no_main]

use libfuzzer_sys::fuzz_target;
use oracle_arena::params::{DetParams, RandParams};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(p) = DetParams::from_json(s) {
        let _ = p.validate();
        let again = DetParams::from_json(&p.to_json()).expect("re-parse");
        assert_eq!(again.to_json(), p.to_json());
    }
    if let Ok(p) = RandParams::from_json(s) {
        let _ = p.validate();
        let again = RandParams::from_json(&p.to_json()).expect("re-parse");
        assert_eq!(again.to_json(), p.to_json());
    }
});
