//! Randomized feasibility against the oblivious oracle with `J_P` candidate
//! probe schedules.

use std::collections::BTreeMap;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::players::{orthogonal_exploratory_queries, RandomHalfspaceAlgorithm, ReplayAlgorithm};
use super::{GameError, GameId, GameRecord, GameTranscript, Result, Verdict};
use crate::bits::BitBuf;
use crate::oracle::randomized::{RandOracleState, TupleSource};
use crate::oracle::QUERY_NORM_TOL;
use crate::params::RandParams;
use crate::rng::stream;
use crate::solvers::{measure_memory, MemoryBoundedAlgorithm, SolverError};
use crate::subspace::{sample_subspace, sample_subspace_within, OrthoBasis, Subspace};

/// `sequences[j][p-1][a]` is the tuple `V^{(p,j,a)}`.
pub type Schedules = Vec<Vec<Vec<Vec<Subspace>>>>;

pub struct RandFeasSetup {
    pub algorithm: Box<dyn MemoryBoundedAlgorithm>,
    pub message: BitBuf,
    /// 0-based.
    pub j_hat: usize,
}

pub trait RandFeasPlayer {
    fn name(&self) -> String;

    fn setup(&mut self, params: &RandParams, e: &[Subspace], schedules: &Schedules, rng: &mut dyn RngCore) -> RandFeasSetup;
}

/// Zero memory, random half-space queries, ĵ = 0.
#[derive(Clone, Copy, Debug, Default)]
pub struct RandomRandFeasPlayer;

impl RandFeasPlayer for RandomRandFeasPlayer {
    fn name(&self) -> String {
        "random".into()
    }

    fn setup(&mut self, params: &RandParams, _: &[Subspace], _: &Schedules, _: &mut dyn RngCore) -> RandFeasSetup {
        RandFeasSetup {
            algorithm: Box::new(RandomHalfspaceAlgorithm::new(params.d)),
            message: BitBuf::new(),
            j_hat: 0,
        }
    }
}

/// Harness sanity check only: scripts `k` queries orthogonal to every hidden
/// subspace.
#[derive(Clone, Copy, Debug, Default)]
pub struct FullInfoRandFeasPlayer;

impl RandFeasPlayer for FullInfoRandFeasPlayer {
    fn name(&self) -> String {
        "full-information".into()
    }

    fn setup(&mut self, params: &RandParams, e: &[Subspace], _: &Schedules, rng: &mut dyn RngCore) -> RandFeasSetup {
        let span = OrthoBasis::from_subspaces(params.d, e);
        let ev = crate::oracle::e_vector(params.d);
        let script = orthogonal_exploratory_queries(&ev, &span, params.k, rng).unwrap_or_default();
        let alg = ReplayAlgorithm::new(params.d, params.k);
        let message = alg.script(&script);
        RandFeasSetup {
            algorithm: Box::new(alg),
            message,
            j_hat: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandFeasRecord {
    pub d: usize,
    pub depth: usize,
    pub k: usize,
    pub j_p: usize,
    pub j_hat: usize,
    /// `T_P`.
    pub horizon: u64,
    pub m_bits: usize,
    pub message_bits: usize,
    /// Clock values of the depth-P exploratory queries.
    pub exploratory_times: Vec<u64>,
    pub queries: u64,
}

impl RandFeasRecord {
    pub(crate) fn judge(&self) -> Result<Verdict> {
        if self.message_bits > self.m_bits {
            return Ok(Verdict::Lose);
        }
        let n = self.exploratory_times.iter().filter(|&&t| t < self.horizon).count();
        Ok(Verdict::from_bool(n >= self.k))
    }
}

/// Sample `E_1 … E_P` and `J_P` independent schedules, each holding
/// `T_P / T_p` tuples at depth `p`.
pub fn sample_game_instance(params: &RandParams, j_p: usize, seed: u64) -> Result<(Vec<Subspace>, Schedules)> {
    let mut rng = stream(seed, "game/rand-feas/oracle", &[]);
    let e = (0..params.depth)
        .map(|_| sample_subspace(params.d, params.d_tilde, &mut rng))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let horizon = params.period_len(params.depth);
    let mut sched = Vec::with_capacity(j_p);
    for _ in 0..j_p {
        let mut per_depth = Vec::with_capacity(params.depth);
        for p in 1..=params.depth {
            let count = horizon / params.period_len(p);
            let l = params.l_at(p);
            let tuples = (0..count)
                .map(|_| {
                    (0..params.k)
                        .map(|_| sample_subspace_within(&e[p - 1], l, &mut rng))
                        .collect::<std::result::Result<Vec<_>, _>>()
                })
                .collect::<std::result::Result<Vec<_>, _>>()?;
            per_depth.push(tuples);
        }
        sched.push(per_depth);
    }
    Ok((e, sched))
}

/// Play randomized feasibility for one depth-P period.
pub fn run_randomized_feasibility_game(
    player: &mut dyn RandFeasPlayer,
    params: &RandParams,
    j_p: usize,
    seed: u64,
) -> Result<GameTranscript> {
    if j_p == 0 {
        return Err(GameError::Invalid("J_P must be at least 1".into()));
    }
    let (e, schedules) = sample_game_instance(params, j_p, seed)?;
    let setup = player.setup(params, &e, &schedules, &mut stream(seed, "game/rand-feas/player", &[]));
    if setup.j_hat >= j_p {
        return Err(GameError::IndexOutOfRange { j_hat: setup.j_hat, j: j_p });
    }
    let alg = setup.algorithm;
    if alg.dim() != params.d {
        return Err(GameError::Arity(format!("algorithm dimension {} ≠ d = {}", alg.dim(), params.d)));
    }
    let horizon = params.period_len(params.depth);
    let m_bits = alg.budget_bits();
    let message_bits = setup.message.bit_len();
    let mut notes = Vec::new();
    let mut exploratory_times = Vec::new();
    let mut queries = 0;
    if message_bits > m_bits {
        notes.push(format!("message of {message_bits} bits exceeds M = {m_bits}"));
    } else {
        let chosen = schedules.into_iter().nth(setup.j_hat).expect("index checked");
        let mut oracle = RandOracleState::with_source(params, e, TupleSource::Fixed(chosen))?;
        let mut memory = setup.message.clone();
        memory.pad_to(m_bits);
        let mut alg_rng = stream(seed, "game/rand-feas/alg", &[]);
        let big_p = params.depth;
        for t in 0..horizon {
            let x = alg.query(&memory, &mut alg_rng)?;
            let norm = x.norm();
            if !(norm <= 1.0 + QUERY_NORM_TOL) {
                return Err(SolverError::QueryOutsideBall { iteration: t + 1, norm }.into());
            }
            let before = oracle.exploratory_count(big_p);
            let (resp, _) = oracle.step(&x)?;
            queries += 1;
            if oracle.exploratory_count(big_p) > before {
                exploratory_times.push(t);
            }
            memory = alg.update(&memory, &x, &resp, &mut alg_rng)?;
            let bits = measure_memory(&memory);
            if bits > m_bits {
                return Err(SolverError::BudgetExceeded { iteration: t + 1, bits, budget: m_bits }.into());
            }
        }
    }
    let record = RandFeasRecord {
        d: params.d,
        depth: params.depth,
        k: params.k,
        j_p,
        j_hat: setup.j_hat,
        horizon,
        m_bits,
        message_bits,
        exploratory_times,
        queries,
    };
    let verdict = record.judge()?;
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("exploratory".into(), record.exploratory_times.len() as f64);
    diagnostics.insert("horizon".into(), horizon as f64);
    Ok(GameTranscript {
        game: GameId::RandFeas,
        seed,
        player: format!("{} ({})", player.name(), alg.id()),
        record: GameRecord::RandFeas(record),
        verdict,
        diagnostics,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{compute_rand, Constants, Mode};

    pub(crate) fn lab_rand(d: usize, n: usize) -> RandParams {
        let c = Constants {
            l_override: Some(2),
            mu_factor: Some(1.0),
            eps_target: Some(1e-3),
            n_override: Some(n),
            ..Constants::default()
        };
        compute_rand(d, 2, 3, None, c, Mode::Lab).unwrap()
    }

    #[test]
    fn full_information_wins() {
        let params = lab_rand(120, 4);
        for seed in 0..5 {
            let t = run_randomized_feasibility_game(&mut FullInfoRandFeasPlayer, &params, 2, seed).unwrap();
            assert!(t.is_win(), "{:?} {:?}", t.diagnostics, t.notes);
            assert_eq!(t.recheck().unwrap(), Verdict::Win);
        }
    }

    #[test]
    fn random_loses() {
        let params = lab_rand(120, 4);
        for seed in 0..10 {
            let t = run_randomized_feasibility_game(&mut RandomRandFeasPlayer, &params, 1, seed).unwrap();
            assert!(!t.is_win());
        }
    }

    #[test]
    fn index_and_length_checks() {
        struct Bad(usize, usize);
        impl RandFeasPlayer for Bad {
            fn name(&self) -> String {
                "bad".into()
            }
            fn setup(&mut self, params: &RandParams, _: &[Subspace], _: &Schedules, _: &mut dyn RngCore) -> RandFeasSetup {
                RandFeasSetup {
                    algorithm: Box::new(RandomHalfspaceAlgorithm::new(params.d)),
                    message: BitBuf::zeros(self.1),
                    j_hat: self.0,
                }
            }
        }
        let params = lab_rand(120, 4);
        assert!(matches!(
            run_randomized_feasibility_game(&mut Bad(2, 0), &params, 2, 0),
            Err(GameError::IndexOutOfRange { .. })
        ));
        let t = run_randomized_feasibility_game(&mut Bad(0, 1), &params, 2, 0).unwrap();
        assert!(!t.is_win());
        assert!(t.notes[0].contains("exceeds M = 0"));
    }

    #[test]
    fn schedule_shapes() {
        let params = lab_rand(120, 4);
        let (e, s) = sample_game_instance(&params, 3, 1).unwrap();
        assert_eq!(e.len(), 2);
        assert_eq!(s.len(), 3);
        assert_eq!(s[0][0].len() as u64, params.period_len(2) / params.period_len(1));
        assert_eq!(s[0][1].len(), 1);
    }
}
