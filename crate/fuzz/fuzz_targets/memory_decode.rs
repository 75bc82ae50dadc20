#![no_main]

use libfuzzer_sys::fuzz_target;
use oracle_arena::bits::BitBuf;
use oracle_arena::games::players::ReplayAlgorithm;
use oracle_arena::rng::stream;
use oracle_arena::solvers::{ellipsoid_solver, subgradient_solver, MemoryBoundedAlgorithm, StepSchedule};

// Layout: selector byte, dimension byte, then the raw memory bytes.
fuzz_target!(|data: &[u8]| {
    let [sel, dim, rest @ ..] = data else { return };
    let d = 2 + (*dim as usize % 15);
    let memory = BitBuf::from_bytes(rest.to_vec());
    let mut rng = stream(0, "fuzz/memory", &[]);
    match sel % 3 {
        0 => {
            let alg = ellipsoid_solver(d, 1.0).expect("d ≥ 2");
            if let Ok(state) = alg.decode(&memory) {
                assert_eq!(alg.decode(&alg.encode(&state)).expect("round trip"), state);
            }
            if let Ok(x) = alg.query(&memory, &mut rng) {
                assert!(x.norm() <= 1.0 + 1e-9);
            }
        }
        1 => {
            let alg = subgradient_solver(d, StepSchedule::InvSqrt(1.0));
            if let Ok(state) = alg.decode(&memory) {
                let _ = alg.encode(&state);
            }
            if let Ok(x) = alg.query(&memory, &mut rng) {
                assert!(x.norm() <= 1.0 + 1e-9);
            }
        }
        _ => {
            let n = 1 + (*dim as usize / 15) % 4;
            let alg = ReplayAlgorithm::new(d, n);
            let _ = alg.query(&memory, &mut rng);
        }
    }
});
