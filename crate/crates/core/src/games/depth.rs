//! The depth-`p` feasibility game.
//!
//! The oracle samples `E_1 … E_P` and `k` probes for every depth deeper than
//! `p`. The player sees all of it, then hands over an M-bit memory algorithm,
//! its initial memory, and for each deeper depth an exploratory count `n_q`
//! with that many vectors. Probes `j > n_q` are fresh. The oracle loop is the
//! adaptive oracle itself, started from the injected state. The player wins
//! once `n_p = k`, and loses as soon as a deeper period completes or after
//! `T_max` queries.

use std::collections::BTreeMap;

use nalgebra::DVector;
use rand::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use super::players::{orthogonal_exploratory_queries, ReplayAlgorithm};
use super::{GameError, GameId, GameRecord, GameTranscript, Result, Verdict};
use crate::bits::BitBuf;
use crate::oracle::deterministic::DetOracleState;
use crate::oracle::QUERY_NORM_TOL;
use crate::params::DetParams;
use crate::rng::{stream, StreamRng};
use crate::solvers::{measure_memory, MemoryBoundedAlgorithm, SolverError};
use crate::subspace::{sample_subspace, sample_subspace_within, OrthoBasis, Subspace, VectorList};

/// What the player hands the oracle.
pub struct DepthSetup {
    pub algorithm: Box<dyn MemoryBoundedAlgorithm>,
    /// Initial memory; padded with zeros to the algorithm's budget.
    pub message: BitBuf,
    /// `(n_q, y_1^{(q)} … y_{n_q}^{(q)})` for `q = p+1 … P`. Missing entries
    /// default to zero counts.
    pub deeper: Vec<VectorList>,
}

pub trait DepthPlayer {
    fn name(&self) -> String;

    /// `e` holds `E_1 … E_P`; `deeper_probes[i]` the `k` probes of depth `p+1+i`.
    fn setup(
        &mut self,
        params: &DetParams,
        p: usize,
        e: &[Subspace],
        deeper_probes: &[Vec<Subspace>],
        rng: &mut dyn RngCore,
    ) -> DepthSetup;
}

/// Uses a zero message and no injected vectors, then runs the given solver.
pub struct SolverPlayer<F: Fn(&DetParams) -> Box<dyn MemoryBoundedAlgorithm>> {
    pub label: String,
    pub make: F,
}

impl<F: Fn(&DetParams) -> Box<dyn MemoryBoundedAlgorithm>> DepthPlayer for SolverPlayer<F> {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn setup(&mut self, params: &DetParams, _: usize, _: &[Subspace], _: &[Vec<Subspace>], _: &mut dyn RngCore) -> DepthSetup {
        DepthSetup {
            algorithm: (self.make)(params),
            message: BitBuf::new(),
            deeper: Vec::new(),
        }
    }
}

/// Harness sanity check only: reads the hidden subspaces and scripts `k`
/// queries orthogonal to all of them into a replay algorithm.
#[derive(Clone, Copy, Debug, Default)]
pub struct FullInfoDepthPlayer;

impl DepthPlayer for FullInfoDepthPlayer {
    fn name(&self) -> String {
        "full-information".into()
    }

    fn setup(&mut self, params: &DetParams, _: usize, e: &[Subspace], _: &[Vec<Subspace>], rng: &mut dyn RngCore) -> DepthSetup {
        let span = OrthoBasis::from_subspaces(params.d, e);
        let ev = crate::oracle::e_vector(params.d);
        let script = orthogonal_exploratory_queries(&ev, &span, params.k, rng).unwrap_or_default();
        let alg = ReplayAlgorithm::new(params.d, params.k);
        let message = alg.script(&script);
        DepthSetup {
            algorithm: Box::new(alg),
            message,
            deeper: Vec::new(),
        }
    }
}

/// Scripts `x_j = −a·e + √(1 − a²)·e_{j+1}` with `a` just above 1/2: `k`
/// half-space queries built from orthonormal directions in `span(e)^⊥`,
/// without looking at the hidden subspaces.
#[derive(Clone, Copy, Debug, Default)]
pub struct HalfspaceScriptPlayer;

impl DepthPlayer for HalfspaceScriptPlayer {
    fn name(&self) -> String {
        "halfspace-script".into()
    }

    fn setup(&mut self, params: &DetParams, _: usize, _: &[Subspace], _: &[Vec<Subspace>], _: &mut dyn RngCore) -> DepthSetup {
        let (d, k) = (params.d, params.k.min(params.d - 1));
        let a: f64 = 0.5 * (1.0 + 1e-9);
        let b = (1.0 - a * a).sqrt();
        let script: VectorList = (0..k)
            .map(|j| {
                let mut x = DVector::zeros(d);
                x[0] = -a;
                x[j + 1] = b;
                x
            })
            .collect();
        let alg = ReplayAlgorithm::new(d, params.k);
        let message = alg.script(&script);
        DepthSetup {
            algorithm: Box::new(alg),
            message,
            deeper: Vec::new(),
        }
    }
}

/// One oracle step as the game sees it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthEvent {
    pub t: u64,
    pub exploratory: Vec<usize>,
    pub resets: Vec<usize>,
    /// `n_p` after the step.
    pub count_p: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthRecord {
    pub p: usize,
    pub depth: usize,
    pub k: usize,
    pub d: usize,
    pub t_max: u64,
    pub m_bits: usize,
    pub message_bits: usize,
    pub injected_counts: Vec<usize>,
    pub events: Vec<DepthEvent>,
}

impl DepthRecord {
    pub(crate) fn judge(&self) -> Result<Verdict> {
        if self.message_bits > self.m_bits {
            return Ok(Verdict::Lose);
        }
        let mut count = 0usize;
        for (i, ev) in self.events.iter().enumerate() {
            if i as u64 >= self.t_max {
                break;
            }
            if ev.resets.iter().any(|&q| q > self.p) {
                return Ok(Verdict::Lose);
            }
            if ev.exploratory.contains(&self.p) {
                count += 1;
            }
            if count != ev.count_p {
                return Err(GameError::Transcript(format!(
                    "step {}: recorded n_p = {}, replayed {count}",
                    ev.t, ev.count_p
                )));
            }
            if count >= self.k {
                return Ok(Verdict::Win);
            }
        }
        Ok(Verdict::Lose)
    }
}

/// Play the depth game at depth `p` for at most `t_max` queries.
pub fn run_depth_p_feasibility_game(
    player: &mut dyn DepthPlayer,
    params: &DetParams,
    p: usize,
    t_max: u64,
    seed: u64,
) -> Result<GameTranscript> {
    let (big_p, k, d) = (params.depth, params.k, params.d);
    if p == 0 || p > big_p {
        return Err(GameError::Invalid(format!("p = {p} not in [1, {big_p}]")));
    }
    let mut oracle_rng = stream(seed, "game/depth/oracle", &[]);
    let e = (0..big_p)
        .map(|_| sample_subspace(d, params.d_tilde, &mut oracle_rng))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let deeper_probes = (p..big_p)
        .map(|q| {
            (0..k)
                .map(|_| sample_subspace_within(&e[q], params.l_at(q + 1), &mut oracle_rng))
                .collect::<std::result::Result<Vec<_>, _>>()
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;

    let mut player_rng = stream(seed, "game/depth/player", &[]);
    let setup = player.setup(params, p, &e, &deeper_probes, &mut player_rng);
    let alg = setup.algorithm;
    if alg.dim() != d {
        return Err(GameError::Arity(format!("algorithm dimension {} ≠ d = {d}", alg.dim())));
    }
    if setup.deeper.len() > big_p - p {
        return Err(GameError::Arity(format!(
            "{} deeper depths submitted, only {} exist",
            setup.deeper.len(),
            big_p - p
        )));
    }
    let mut probes = vec![Vec::new(); big_p];
    let mut explo = vec![Vec::new(); big_p];
    let mut injected_counts = vec![0; big_p - p];
    for (i, ys) in setup.deeper.iter().enumerate() {
        if ys.len() > k {
            return Err(GameError::Arity(format!("n_{} = {} exceeds k = {k}", p + 1 + i, ys.len())));
        }
        injected_counts[i] = ys.len();
        probes[p + i] = deeper_probes[i][..ys.len()].to_vec();
        explo[p + i] = ys.clone();
    }
    let mut seed_bytes = [0u8; 32];
    stream(seed, "game/depth/probes", &[]).fill_bytes(&mut seed_bytes);
    let mut oracle = DetOracleState::from_parts(params, e, probes, explo, StreamRng::from_seed(seed_bytes))
        .map_err(|err| match err {
            crate::oracle::OracleError::InjectedState(msg) => GameError::Arity(msg),
            other => other.into(),
        })?;
    oracle.set_logging(false);

    let m_bits = alg.budget_bits();
    let message_bits = setup.message.bit_len();
    let mut notes = Vec::new();
    let mut events = Vec::new();
    let mut verdict = Verdict::Lose;
    if message_bits > m_bits {
        notes.push(format!("message of {message_bits} bits exceeds M = {m_bits}"));
    } else {
        let mut memory = setup.message.clone();
        memory.pad_to(m_bits);
        let mut alg_rng = stream(seed, "game/depth/alg", &[]);
        for t in 1..=t_max {
            let x: DVector<f64> = alg.query(&memory, &mut alg_rng)?;
            let norm = x.norm();
            if !(norm <= 1.0 + QUERY_NORM_TOL) {
                return Err(SolverError::QueryOutsideBall { iteration: t, norm }.into());
            }
            let report = oracle.step(&x)?;
            let ev = DepthEvent {
                t,
                exploratory: report.exploratory.clone(),
                resets: report.resets.clone(),
                count_p: oracle.count(p),
            };
            let deeper_reset = ev.resets.iter().any(|&q| q > p);
            if deeper_reset && report.exploratory.contains(&p) {
                notes.push(format!("t = {t}: depth-{p} exploratory query coincided with a deeper reset"));
            }
            events.push(ev);
            if deeper_reset {
                notes.push(format!("t = {t}: a deeper period completed"));
                break;
            }
            if oracle.count(p) == k {
                verdict = Verdict::Win;
                break;
            }
            memory = alg.update(&memory, &x, &report.response, &mut alg_rng)?;
            let bits = measure_memory(&memory);
            if bits > m_bits {
                return Err(SolverError::BudgetExceeded { iteration: t, bits, budget: m_bits }.into());
            }
        }
    }
    let record = DepthRecord {
        p,
        depth: big_p,
        k,
        d,
        t_max,
        m_bits,
        message_bits,
        injected_counts,
        events,
    };
    debug_assert_eq!(record.judge().ok(), Some(verdict));
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("queries".into(), record.events.len() as f64);
    diagnostics.insert("message_bits".into(), message_bits as f64);
    Ok(GameTranscript {
        game: GameId::Depth,
        seed,
        player: format!("{} ({})", player.name(), alg.id()),
        record: GameRecord::Depth(record),
        verdict,
        diagnostics,
        notes,
    })
}
