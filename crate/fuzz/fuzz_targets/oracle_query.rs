#![no_main]

use std::sync::OnceLock;

use libfuzzer_sys::fuzz_target;
use nalgebra::DVector;
use oracle_arena::oracle::{new_det_instance, new_rand_instance, DetOracleState, RandOracleState};
use oracle_arena::params::{compute_det, compute_rand, Constants, Mode};
use oracle_arena::rng::stream;

const D: usize = 24;

fn oracles() -> &'static (DetOracleState, RandOracleState) {
    static CELL: OnceLock<(DetOracleState, RandOracleState)> = OnceLock::new();
    CELL.get_or_init(|| {
        let lab = |l| Constants { l_override: Some(l), n_override: Some(2), eps_target: Some(1e-3), ..Constants::default() };
        let dp = compute_det(D, 2, 2, 1.0, None, lab(1), Mode::Lab).expect("det params");
        let rp = compute_rand(D, 2, 3, None, lab(1), Mode::Lab).expect("rand params");
        let det = new_det_instance(&dp, &mut stream(0, "fuzz/oracle", &[])).expect("det instance");
        let rand = new_rand_instance(&rp, 0).expect("rand instance");
        (det, rand)
    })
}

// Layout: selector byte, then little-endian f64 queries of dimension D.
fuzz_target!(|data: &[u8]| {
    let [sel, rest @ ..] = data else { return };
    let (det, rand) = oracles();
    let (mut det, mut rand) = (det.clone(), rand.clone());
    for chunk in rest.chunks_exact(8 * D).take(16) {
        let x = DVector::from_iterator(D, chunk.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())));
        if sel % 2 == 0 {
            let _ = det.step(&x);
            let _ = det.membership(&x);
        } else {
            let _ = rand.step(&x);
            let _ = rand.membership(&x);
        }
    }
});
