//! The probing game.
//!
//! The oracle holds `k` independent uniform `l`-dimensional subspaces
//! `V_1 … V_k`. In round `i` the player submits `y_i` having seen `V_j`,
//! `j < i`, then `V_i` is revealed. The player wins if at some round `i` a
//! unit `z ∈ span(y_{≤i})` has `‖Proj_{span(V_{≤i})}(z)‖ ≤ ρ`.
//!
//! The inner minimum is exact: with `Q_y`, `Q_V` orthonormal bases of the two
//! spans it equals the smallest singular value of `Q_Vᵀ Q_y`, and zero when
//! `span(y_{≤i})` has more dimensions than `span(V_{≤i})`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{subspace_from, to_columns, to_vec, vectors_from, GameError, GameId, GameRecord, GameTranscript, Result, Verdict};
use crate::rng::stream;
use crate::subspace::{orthonormalize, random_unit_orthogonal, random_unit_vector, sample_subspace, OrthoBasis, Subspace};

pub trait ProbingPlayer {
    fn name(&self) -> String;

    /// Full-information players see every `V_i` before the first round.
    fn full_information(&self) -> bool {
        false
    }

    fn observe_all(&mut self, _probes: &[Subspace]) {}

    /// Query `y_i` given the revealed `V_1 … V_{i−1}`.
    fn query(&mut self, d: usize, revealed: &[Subspace], rng: &mut dyn RngCore) -> DVector<f64>;
}

/// Uniform unit queries.
#[derive(Clone, Debug, Default)]
pub struct RandomProber;

impl ProbingPlayer for RandomProber {
    fn name(&self) -> String {
        "random".into()
    }

    fn query(&mut self, d: usize, _revealed: &[Subspace], rng: &mut dyn RngCore) -> DVector<f64> {
        random_unit_vector(d, rng)
    }
}

/// Unit queries orthogonal to every revealed subspace.
#[derive(Clone, Debug, Default)]
pub struct GreedyProber;

impl ProbingPlayer for GreedyProber {
    fn name(&self) -> String {
        "greedy".into()
    }

    fn query(&mut self, d: usize, revealed: &[Subspace], rng: &mut dyn RngCore) -> DVector<f64> {
        let span = OrthoBasis::from_subspaces(d, revealed);
        random_unit_orthogonal(&span, rng).unwrap_or_else(|| DVector::zeros(d))
    }
}

/// Harness sanity check only: reads all `V_i` up front and answers
/// orthogonally to the lot.
#[derive(Clone, Debug, Default)]
pub struct FullInfoProber {
    all: Vec<Subspace>,
}

impl ProbingPlayer for FullInfoProber {
    fn name(&self) -> String {
        "full-information".into()
    }

    fn full_information(&self) -> bool {
        true
    }

    fn observe_all(&mut self, probes: &[Subspace]) {
        self.all = probes.to_vec();
    }

    fn query(&mut self, d: usize, _revealed: &[Subspace], rng: &mut dyn RngCore) -> DVector<f64> {
        let span = OrthoBasis::from_subspaces(d, &self.all);
        random_unit_orthogonal(&span, rng).unwrap_or_else(|| DVector::zeros(d))
    }
}

/// Minima at or below this are reported as exactly zero.
pub const ROUNDOFF: f64 = 1e-12;

/// `min_{z ∈ span(ys), ‖z‖=1} ‖Proj_{span(vs)}(z)‖`, or `+∞` when the queries
/// span nothing.
pub fn probing_min(vs: &[&Subspace], ys: &[DVector<f64>], d: usize) -> f64 {
    if ys.is_empty() {
        return f64::INFINITY;
    }
    let y = DMatrix::from_columns(ys);
    let (qy, ry) = orthonormalize(&y, 1e-10);
    if ry == 0 {
        return f64::INFINITY;
    }
    let mut qv = OrthoBasis::new(d);
    for v in vs {
        qv.push_subspace(v);
    }
    let rv = qv.dim();
    if ry > rv {
        return 0.0;
    }
    let qv = DMatrix::from_columns(qv.vectors());
    let m = qv.transpose() * qy;
    let s = m.singular_values().iter().copied().fold(f64::INFINITY, f64::min);
    if s <= ROUNDOFF {
        0.0
    } else {
        s
    }
}

/// The probing minimum at every round `i = 1 … k`.
pub fn probing_level_values(probes: &[Subspace], queries: &[DVector<f64>]) -> Vec<f64> {
    let d = probes.first().map(|v| v.ambient_dim()).unwrap_or(0);
    (1..=probes.len().min(queries.len()))
        .map(|i| {
            let vs: Vec<&Subspace> = probes[..i].iter().collect();
            probing_min(&vs, &queries[..i], d)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbingRecord {
    pub d: usize,
    pub l: usize,
    pub k: usize,
    pub rho: f64,
    /// Orthonormal bases of `V_1 … V_k`, column-major.
    pub probes: Vec<Vec<Vec<f64>>>,
    /// `y_1 … y_k`; zero queries are kept as submitted.
    pub queries: Vec<Vec<f64>>,
    /// Probing minimum per round.
    pub level_values: Vec<f64>,
}

impl ProbingRecord {
    pub(crate) fn judge(&self, rho: Option<f64>) -> Result<Verdict> {
        let rho = rho.unwrap_or(self.rho);
        if self.probes.len() != self.k || self.queries.len() != self.k {
            return Err(GameError::Transcript("probing record arity".into()));
        }
        let probes = self
            .probes
            .iter()
            .map(|c| subspace_from(self.d, c))
            .collect::<Result<Vec<_>>>()?;
        let ys = vectors_from(self.d, &self.queries)?;
        let values = probing_level_values(&probes, &ys);
        Ok(Verdict::from_bool(values.iter().any(|&v| v <= rho)))
    }

    /// Whether the minimum is at most `ρ` at every round.
    pub fn wins_every_round(&self) -> bool {
        self.level_values.iter().all(|&v| v <= self.rho)
    }
}

/// Play the probing game with `player`, all randomness derived from `seed`.
pub fn run_probing_game(
    player: &mut dyn ProbingPlayer,
    d: usize,
    l: usize,
    k: usize,
    rho: f64,
    seed: u64,
) -> Result<GameTranscript> {
    if l == 0 || k == 0 || l > d {
        return Err(GameError::Invalid(format!("need 1 ≤ l ≤ d and k ≥ 1, got d = {d}, l = {l}, k = {k}")));
    }
    if !(rho >= 0.0) {
        return Err(GameError::Invalid(format!("ρ = {rho}")));
    }
    let mut oracle_rng = stream(seed, "game/probing/oracle", &[]);
    let mut player_rng = stream(seed, "game/probing/player", &[]);
    let probes = (0..k)
        .map(|_| sample_subspace(d, l, &mut oracle_rng))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if player.full_information() {
        player.observe_all(&probes);
    }
    let mut queries = Vec::with_capacity(k);
    let mut notes = Vec::new();
    for i in 0..k {
        let y = player.query(d, &probes[..i], &mut player_rng);
        if y.len() != d {
            return Err(GameError::Arity(format!("query {} has length {}, expected {d}", i + 1, y.len())));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(GameError::Invalid(format!("query {} is not finite", i + 1)));
        }
        if y.norm() == 0.0 {
            notes.push(format!("query {} is zero; skipped as rank-deficient", i + 1));
        }
        queries.push(y);
    }
    let level_values = probing_level_values(&probes, &queries);
    let min_value = level_values.iter().copied().fold(f64::INFINITY, f64::min);
    let record = ProbingRecord {
        d,
        l,
        k,
        rho,
        probes: probes.iter().map(|v| to_columns(v.basis())).collect(),
        queries: queries.iter().map(to_vec).collect(),
        level_values,
    };
    let verdict = Verdict::from_bool(min_value <= rho);
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("min_value".into(), min_value);
    diagnostics.insert("every_round".into(), if record.wins_every_round() { 1.0 } else { 0.0 });
    Ok(GameTranscript {
        game: GameId::Probing,
        seed,
        player: player.name(),
        record: GameRecord::Probing(record),
        verdict,
        diagnostics,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::Thresholds;

    #[test]
    fn rho_one_always_wins() {
        for seed in 0..5 {
            let t = run_probing_game(&mut RandomProber, 20, 3, 4, 1.0, seed).unwrap();
            assert!(t.is_win());
        }
    }

    #[test]
    fn single_orthogonal_query_wins_at_zero() {
        let t = run_probing_game(&mut FullInfoProber::default(), 12, 3, 1, 0.0, 3).unwrap();
        assert!(t.diagnostics["min_value"] < 1e-12);
        assert!(t.is_win());
    }

    #[test]
    fn more_queries_than_probe_dims_gives_zero() {
        let v = sample_subspace(6, 1, &mut stream(1, "t", &[])).unwrap();
        let ys = vec![random_unit_vector(6, &mut stream(2, "t", &[])), random_unit_vector(6, &mut stream(3, "t", &[]))];
        assert_eq!(probing_min(&[&v], &ys, 6), 0.0);
    }

    #[test]
    fn zero_queries_are_skipped() {
        struct Zero;
        impl ProbingPlayer for Zero {
            fn name(&self) -> String {
                "zero".into()
            }
            fn query(&mut self, d: usize, _: &[Subspace], _: &mut dyn RngCore) -> DVector<f64> {
                DVector::zeros(d)
            }
        }
        let t = run_probing_game(&mut Zero, 10, 2, 3, 0.5, 0).unwrap();
        assert_eq!(t.verdict, Verdict::Lose);
        assert_eq!(t.notes.len(), 3);
        assert!(t.diagnostics["min_value"].is_infinite());
    }

    #[test]
    fn recheck_and_monotone_in_rho() {
        for seed in 0..10 {
            let t = run_probing_game(&mut GreedyProber, 30, 2, 4, 0.3, seed).unwrap();
            let back = GameTranscript::from_json(&t.to_json()).unwrap();
            assert_eq!(back.recheck().unwrap(), t.verdict);
            if t.is_win() {
                let bigger = Thresholds { rho: Some(0.6), ..Default::default() };
                assert!(t.recheck_with(bigger).unwrap().is_win());
            }
        }
    }

    #[test]
    fn replay_is_identical() {
        let a = run_probing_game(&mut GreedyProber, 40, 3, 5, 0.1, 11).unwrap();
        let b = run_probing_game(&mut GreedyProber, 40, 3, 5, 0.1, 11).unwrap();
        assert_eq!(a, b);
    }
}
