//! The orthogonal subspace game and its simplified and adapted variants.
//!
//! Phase 1 sees the hidden `d̃`-dimensional subspace `E` and every sample
//! batch, and leaves a message of at most `M` bits (and, in the adapted game,
//! a batch index ĵ). Phase 2 is a separate object built from the strategy
//! after phase 1 has been dropped; it receives the message and batch ĵ only and
//! must return `k` unit vectors with `‖Proj_E(y_i)‖ ≤ β` and
//! `‖Proj_{span(y_{<i})^⊥}(y_i)‖ ≥ γ`.

use std::collections::BTreeMap;

use nalgebra::DVector;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{subspace_from, to_columns, to_vec, vectors_from, GameError, GameId, GameRecord, GameTranscript, Result, Verdict, UNIT_TOL};
use crate::bits::BitBuf;
use crate::rng::stream;
use crate::subspace::{random_unit_orthogonal, random_unit_vector, sample_subspace, OrthoBasis, Subspace, VectorList};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OsgVariant {
    /// The orthogonal subspace game.
    Full,
    /// Simplified: no samples.
    Simplified,
    /// Adapted: `J` batches and a player-chosen index.
    Adapted,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OsgSetup {
    pub d: usize,
    pub d_tilde: usize,
    pub m_bits: usize,
    pub k: usize,
    pub m: usize,
    pub beta: f64,
    pub gamma: f64,
    pub j: usize,
}

/// Phase 1.
pub trait OsgEncoder {
    /// Returns the message and the chosen batch index (0-based).
    fn encode(&mut self, e: &Subspace, batches: &[VectorList], m_bits: usize, rng: &mut dyn RngCore) -> (BitBuf, usize);
}

/// Phase 2.
pub trait OsgDecoder {
    fn decode(&mut self, message: &BitBuf, samples: &[DVector<f64>], k: usize, d: usize, rng: &mut dyn RngCore) -> VectorList;
}

pub trait OsgStrategy {
    fn name(&self) -> String;
    fn encoder(&self) -> Box<dyn OsgEncoder>;
    fn decoder(&self) -> Box<dyn OsgDecoder>;
}

struct NoMessage;

impl OsgEncoder for NoMessage {
    fn encode(&mut self, _: &Subspace, _: &[VectorList], _: usize, _: &mut dyn RngCore) -> (BitBuf, usize) {
        (BitBuf::new(), 0)
    }
}

fn fill_orthogonal(span: &mut OrthoBasis, out: &mut VectorList, k: usize, rng: &mut dyn RngCore) {
    while out.len() < k {
        match random_unit_orthogonal(span, rng) {
            Some(y) => {
                span.push(&y);
                out.push(y);
            }
            None => out.push(random_unit_vector(span.ambient_dim(), rng)),
        }
    }
}

/// Empty message; random orthonormal outputs.
#[derive(Clone, Copy, Debug, Default)]
pub struct RandomOsg;

struct RandomDecoder;

impl OsgDecoder for RandomDecoder {
    fn decode(&mut self, _: &BitBuf, _: &[DVector<f64>], k: usize, d: usize, rng: &mut dyn RngCore) -> VectorList {
        let mut out = Vec::with_capacity(k);
        fill_orthogonal(&mut OrthoBasis::new(d), &mut out, k, rng);
        out
    }
}

impl OsgStrategy for RandomOsg {
    fn name(&self) -> String {
        "random".into()
    }
    fn encoder(&self) -> Box<dyn OsgEncoder> {
        Box::new(NoMessage)
    }
    fn decoder(&self) -> Box<dyn OsgDecoder> {
        Box::new(RandomDecoder)
    }
}

/// Empty message; orthonormal outputs orthogonal to the received samples.
#[derive(Clone, Copy, Debug, Default)]
pub struct GreedyOsg;

struct GreedyDecoder;

impl OsgDecoder for GreedyDecoder {
    fn decode(&mut self, _: &BitBuf, samples: &[DVector<f64>], k: usize, d: usize, rng: &mut dyn RngCore) -> VectorList {
        let mut span = OrthoBasis::new(d);
        for v in samples {
            span.push(v);
        }
        let mut out = Vec::with_capacity(k);
        fill_orthogonal(&mut span, &mut out, k, rng);
        out
    }
}

impl OsgStrategy for GreedyOsg {
    fn name(&self) -> String {
        "greedy".into()
    }
    fn encoder(&self) -> Box<dyn OsgEncoder> {
        Box::new(NoMessage)
    }
    fn decoder(&self) -> Box<dyn OsgDecoder> {
        Box::new(GreedyDecoder)
    }
}

/// Writes as many orthonormal vectors of `E^⊥` as fit in the message at 64
/// bits per coordinate, up to `k`; phase 2 replays them and completes the
/// list greedily.
#[derive(Clone, Copy, Debug, Default)]
pub struct EncodeSubspace;

struct EncodeEncoder;

impl OsgEncoder for EncodeEncoder {
    fn encode(&mut self, e: &Subspace, _: &[VectorList], m_bits: usize, rng: &mut dyn RngCore) -> (BitBuf, usize) {
        let d = e.ambient_dim();
        let count = (m_bits / (64 * d.max(1))).min(d - e.dim());
        let mut span = OrthoBasis::new(d);
        span.push_subspace(e);
        let mut msg = BitBuf::new();
        for _ in 0..count {
            let Some(y) = random_unit_orthogonal(&span, rng) else { break };
            span.push(&y);
            for v in y.iter() {
                msg.push_f64(*v);
            }
        }
        (msg, 0)
    }
}

struct EncodeDecoder;

impl OsgDecoder for EncodeDecoder {
    fn decode(&mut self, message: &BitBuf, samples: &[DVector<f64>], k: usize, d: usize, rng: &mut dyn RngCore) -> VectorList {
        let mut r = message.reader();
        let mut out = Vec::new();
        while out.len() < k && r.remaining() >= 64 * d {
            let v: Vec<f64> = (0..d).map(|_| r.read_f64().unwrap_or(0.0)).collect();
            out.push(DVector::from_vec(v));
        }
        let mut span = OrthoBasis::new(d);
        for v in samples.iter().chain(out.iter()) {
            span.push(v);
        }
        fill_orthogonal(&mut span, &mut out, k, rng);
        out
    }
}

impl OsgStrategy for EncodeSubspace {
    fn name(&self) -> String {
        "encode-subspace".into()
    }
    fn encoder(&self) -> Box<dyn OsgEncoder> {
        Box::new(EncodeEncoder)
    }
    fn decoder(&self) -> Box<dyn OsgDecoder> {
        Box::new(EncodeDecoder)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OsgRecord {
    pub variant: OsgVariant,
    pub setup: OsgSetup,
    /// Serialized message length in bits.
    pub message_bits: usize,
    pub j_hat: usize,
    /// Orthonormal basis of `E`, column-major.
    pub e_basis: Vec<Vec<f64>>,
    /// SHA-256 of the samples handed to phase 2.
    pub samples_digest: String,
    pub outputs: Vec<Vec<f64>>,
    /// `‖Proj_E(y_i)‖`.
    pub proj_norms: Vec<f64>,
    /// `‖Proj_{span(y_{<i})^⊥}(y_i)‖`.
    pub residuals: Vec<f64>,
}

impl OsgRecord {
    pub(crate) fn judge(&self, beta: Option<f64>, gamma: Option<f64>) -> Result<Verdict> {
        let s = &self.setup;
        let (beta, gamma) = (beta.unwrap_or(s.beta), gamma.unwrap_or(s.gamma));
        if self.message_bits > s.m_bits || self.outputs.len() != s.k {
            return Ok(Verdict::Lose);
        }
        let e = subspace_from(s.d, &self.e_basis)?;
        let ys = vectors_from(s.d, &self.outputs)?;
        let (proj, res) = measure(&e, &ys);
        let win = ys.iter().all(|y| (y.norm() - 1.0).abs() <= UNIT_TOL)
            && proj.iter().all(|&p| p <= beta)
            && res.iter().all(|&r| r >= gamma);
        Ok(Verdict::from_bool(win))
    }
}

fn measure(e: &Subspace, ys: &[DVector<f64>]) -> (Vec<f64>, Vec<f64>) {
    let d = e.ambient_dim();
    let mut span = OrthoBasis::new(d);
    let mut proj = Vec::with_capacity(ys.len());
    let mut res = Vec::with_capacity(ys.len());
    for y in ys {
        proj.push(e.proj_norm(y).unwrap_or(f64::NAN));
        res.push(span.push(y));
    }
    (proj, res)
}

fn digest_samples(vs: &[DVector<f64>]) -> String {
    let mut bytes = Vec::with_capacity(vs.len() * vs.first().map_or(0, |v| v.len()) * 8);
    for v in vs {
        for c in v.iter() {
            bytes.extend_from_slice(&c.to_le_bytes());
        }
    }
    crate::rng::digest_hex(&bytes)
}

fn sample_batch(e: &Subspace, m: usize, rng: &mut dyn RngCore) -> VectorList {
    (0..m)
        .map(|_| {
            let c = random_unit_vector(e.dim(), rng);
            e.basis() * c
        })
        .collect()
}

fn play(variant: OsgVariant, strategy: &dyn OsgStrategy, setup: OsgSetup, seed: u64) -> Result<GameTranscript> {
    let OsgSetup { d, d_tilde, m_bits, k, m, j, .. } = setup;
    if d_tilde == 0 || d_tilde > d || k == 0 || j == 0 {
        return Err(GameError::Invalid(format!("need 1 ≤ d̃ ≤ d, k ≥ 1, J ≥ 1 (d = {d}, d̃ = {d_tilde}, k = {k}, J = {j})")));
    }
    let game = match variant {
        OsgVariant::Full => GameId::Osg,
        OsgVariant::Simplified => GameId::OsgSimple,
        OsgVariant::Adapted => GameId::AdaptedOsg,
    };
    let tag = format!("game/{game}");
    let mut oracle_rng = stream(seed, &format!("{tag}/oracle"), &[]);
    let e = sample_subspace(d, d_tilde, &mut oracle_rng)?;
    let batches: Vec<VectorList> = (0..j).map(|_| sample_batch(&e, m, &mut oracle_rng)).collect();

    let (message, j_hat) = {
        let mut enc = strategy.encoder();
        enc.encode(&e, &batches, m_bits, &mut stream(seed, &format!("{tag}/phase1"), &[]))
    };
    if j_hat >= j {
        return Err(GameError::IndexOutOfRange { j_hat, j });
    }
    let message_bits = message.bit_len();
    let mut notes = Vec::new();
    let outputs = if message_bits > m_bits {
        notes.push(format!("message of {message_bits} bits exceeds M = {m_bits}"));
        Vec::new()
    } else {
        let mut dec = strategy.decoder();
        dec.decode(&message, &batches[j_hat], k, d, &mut stream(seed, &format!("{tag}/phase2"), &[]))
    };
    if message_bits <= m_bits && outputs.len() != k {
        notes.push(format!("{} outputs, expected {k}", outputs.len()));
    }
    if outputs.iter().any(|y| y.len() != d) {
        return Err(GameError::Arity(format!("outputs must have length {d}")));
    }
    let (proj_norms, residuals) = measure(&e, &outputs);
    let record = OsgRecord {
        variant,
        setup,
        message_bits,
        j_hat,
        e_basis: to_columns(e.basis()),
        samples_digest: digest_samples(&batches[j_hat]),
        outputs: outputs.iter().map(to_vec).collect(),
        proj_norms: proj_norms.clone(),
        residuals: residuals.clone(),
    };
    let verdict = record.judge(None, None)?;
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("message_bits".into(), message_bits as f64);
    diagnostics.insert("max_proj".into(), proj_norms.iter().copied().fold(0.0, f64::max));
    diagnostics.insert("min_residual".into(), residuals.iter().copied().fold(f64::INFINITY, f64::min));
    Ok(GameTranscript {
        game,
        seed,
        player: strategy.name(),
        record: GameRecord::Osg(record),
        verdict,
        diagnostics,
        notes,
    })
}

/// The orthogonal subspace game.
#[allow(clippy::too_many_arguments)]
pub fn run_orthogonal_subspace_game(
    strategy: &dyn OsgStrategy,
    d: usize,
    d_tilde: usize,
    m_bits: usize,
    k: usize,
    m: usize,
    beta: f64,
    gamma: f64,
    seed: u64,
) -> Result<GameTranscript> {
    let setup = OsgSetup { d, d_tilde, m_bits, k, m, beta, gamma, j: 1 };
    play(OsgVariant::Full, strategy, setup, seed)
}

/// The simplified game: no samples in either phase.
pub fn run_simplified_osg(
    strategy: &dyn OsgStrategy,
    d: usize,
    d_tilde: usize,
    m_bits: usize,
    k: usize,
    beta: f64,
    gamma: f64,
    seed: u64,
) -> Result<GameTranscript> {
    let setup = OsgSetup { d, d_tilde, m_bits, k, m: 0, beta, gamma, j: 1 };
    play(OsgVariant::Simplified, strategy, setup, seed)
}

/// The adapted game: `J` sample batches, phase 2 gets batch ĵ.
#[allow(clippy::too_many_arguments)]
pub fn run_adapted_osg(
    strategy: &dyn OsgStrategy,
    d: usize,
    d_tilde: usize,
    m_bits: usize,
    k: usize,
    m: usize,
    beta: f64,
    gamma: f64,
    j: usize,
    seed: u64,
) -> Result<GameTranscript> {
    let setup = OsgSetup { d, d_tilde, m_bits, k, m, beta, gamma, j };
    play(OsgVariant::Adapted, strategy, setup, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::Thresholds;

    #[test]
    fn loose_thresholds_random_wins() {
        for seed in 0..5 {
            let t = run_orthogonal_subspace_game(&RandomOsg, 30, 10, 0, 5, 4, 1.0, 0.0, seed).unwrap();
            assert!(t.is_win(), "{:?}", t.diagnostics);
        }
    }

    #[test]
    fn encode_and_replay_wins() {
        let (d, dt, k) = (40, 20, 6);
        let m_bits = 64 * d * k;
        for seed in 0..10 {
            let t = run_orthogonal_subspace_game(&EncodeSubspace, d, dt, m_bits, k, 5, 1e-9, 0.99, seed).unwrap();
            assert!(t.is_win(), "{:?}", t.diagnostics);
            assert_eq!(t.diagnostics["message_bits"] as usize, m_bits);
        }
    }

    #[test]
    fn zero_budget_random_loses() {
        let (d, dt, k) = (200, 100, 10);
        let gamma = 1.0;
        let beta = gamma / (12.0 * ((k * d) as f64 / dt as f64).sqrt());
        for seed in 0..20 {
            let t = run_orthogonal_subspace_game(&RandomOsg, d, dt, 0, k, 20, beta, gamma, seed).unwrap();
            assert!(!t.is_win());
        }
    }

    #[test]
    fn oversized_message_loses() {
        struct Chatty;
        struct Big;
        impl OsgEncoder for Big {
            fn encode(&mut self, _: &Subspace, _: &[VectorList], m_bits: usize, _: &mut dyn RngCore) -> (BitBuf, usize) {
                (BitBuf::zeros(m_bits + 1), 0)
            }
        }
        impl OsgStrategy for Chatty {
            fn name(&self) -> String {
                "chatty".into()
            }
            fn encoder(&self) -> Box<dyn OsgEncoder> {
                Box::new(Big)
            }
            fn decoder(&self) -> Box<dyn OsgDecoder> {
                Box::new(RandomDecoder)
            }
        }
        let t = run_simplified_osg(&Chatty, 20, 10, 16, 3, 1.0, 0.0, 0).unwrap();
        assert!(!t.is_win());
        assert!(t.notes[0].contains("17 bits exceeds M = 16"));
    }

    #[test]
    fn adapted_index_is_checked() {
        struct Picky(usize);
        struct Enc(usize);
        impl OsgEncoder for Enc {
            fn encode(&mut self, _: &Subspace, _: &[VectorList], _: usize, _: &mut dyn RngCore) -> (BitBuf, usize) {
                (BitBuf::new(), self.0)
            }
        }
        impl OsgStrategy for Picky {
            fn name(&self) -> String {
                "picky".into()
            }
            fn encoder(&self) -> Box<dyn OsgEncoder> {
                Box::new(Enc(self.0))
            }
            fn decoder(&self) -> Box<dyn OsgDecoder> {
                Box::new(GreedyDecoder)
            }
        }
        assert!(run_adapted_osg(&Picky(2), 20, 5, 0, 2, 3, 1.0, 0.0, 3, 0).is_ok());
        assert!(matches!(
            run_adapted_osg(&Picky(3), 20, 5, 0, 2, 3, 1.0, 0.0, 3, 0),
            Err(GameError::IndexOutOfRange { j_hat: 3, j: 3 })
        ));
    }

    #[test]
    fn recheck_monotone_in_beta_and_gamma() {
        for seed in 0..10 {
            let t = run_orthogonal_subspace_game(&GreedyOsg, 30, 10, 0, 4, 8, 0.6, 0.5, seed).unwrap();
            assert_eq!(t.recheck().unwrap(), t.verdict);
            if t.is_win() {
                let th = Thresholds { beta: Some(0.9), gamma: Some(0.2), ..Default::default() };
                assert!(t.recheck_with(th).unwrap().is_win());
            }
        }
    }

    #[test]
    fn greedy_with_spanning_samples_is_orthogonal() {
        let t = run_orthogonal_subspace_game(&GreedyOsg, 30, 10, 0, 4, 10, 1e-8, 0.99, 5).unwrap();
        assert!(t.is_win(), "{:?}", t.diagnostics);
    }
}
