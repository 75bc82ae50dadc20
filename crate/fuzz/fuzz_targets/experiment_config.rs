#![no_main]

use libfuzzer_sys::fuzz_target;
use oracle_arena::harness::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    let Ok(cfg) = ExperimentConfig::from_json(s) else { return };
    let _ = cfg.validate();
    let _ = cfg.kind_label();
    let again = ExperimentConfig::from_json(&cfg.to_json()).expect("re-parse");
    assert_eq!(again.digest(), cfg.digest());
});
