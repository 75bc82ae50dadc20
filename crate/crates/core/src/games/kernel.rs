//! The kernel discovery game.

use std::collections::BTreeMap;

use nalgebra::DVector;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{subspace_from, to_columns, to_vec, vectors_from, GameError, GameId, GameRecord, GameTranscript, Result, Verdict, UNIT_TOL};
use crate::rng::stream;
use crate::subspace::{random_unit_orthogonal, random_unit_vector, sample_subspace, OrthoBasis, Subspace};

pub trait KernelPlayer {
    fn name(&self) -> String;

    fn full_information(&self) -> bool {
        false
    }

    fn observe_subspace(&mut self, _e: &Subspace) {}

    fn output(&mut self, d: usize, samples: &[DVector<f64>], rng: &mut dyn RngCore) -> DVector<f64>;
}

/// Uniform unit output.
#[derive(Clone, Copy, Debug, Default)]
pub struct UniformKernel;

impl KernelPlayer for UniformKernel {
    fn name(&self) -> String {
        "random".into()
    }

    fn output(&mut self, d: usize, _: &[DVector<f64>], rng: &mut dyn RngCore) -> DVector<f64> {
        random_unit_vector(d, rng)
    }
}

/// Unit output orthogonal to every sample.
#[derive(Clone, Copy, Debug, Default)]
pub struct BestEffortKernel;

impl KernelPlayer for BestEffortKernel {
    fn name(&self) -> String {
        "best-effort".into()
    }

    fn output(&mut self, d: usize, samples: &[DVector<f64>], rng: &mut dyn RngCore) -> DVector<f64> {
        let mut span = OrthoBasis::new(d);
        for v in samples {
            span.push(v);
        }
        random_unit_orthogonal(&span, rng).unwrap_or_else(|| random_unit_vector(d, rng))
    }
}

/// Harness sanity check only: answers from `E^⊥` directly.
#[derive(Clone, Debug, Default)]
pub struct FullInfoKernel {
    e: Option<Subspace>,
}

impl KernelPlayer for FullInfoKernel {
    fn name(&self) -> String {
        "full-information".into()
    }

    fn full_information(&self) -> bool {
        true
    }

    fn observe_subspace(&mut self, e: &Subspace) {
        self.e = Some(e.clone());
    }

    fn output(&mut self, d: usize, _: &[DVector<f64>], rng: &mut dyn RngCore) -> DVector<f64> {
        let mut span = OrthoBasis::new(d);
        if let Some(e) = &self.e {
            span.push_subspace(e);
        }
        random_unit_orthogonal(&span, rng).unwrap_or_else(|| random_unit_vector(d, rng))
    }
}

/// `√(d̃/(20d))`.
pub fn kernel_threshold(d: usize, d_tilde: usize) -> f64 {
    (d_tilde as f64 / (20.0 * d as f64)).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelRecord {
    pub d: usize,
    pub d_tilde: usize,
    pub m: usize,
    pub e_basis: Vec<Vec<f64>>,
    pub output: Vec<f64>,
    pub proj_norm: f64,
    pub threshold: f64,
}

impl KernelRecord {
    pub(crate) fn judge(&self) -> Result<Verdict> {
        let e = subspace_from(self.d, &self.e_basis)?;
        let y = vectors_from(self.d, std::slice::from_ref(&self.output))?.remove(0);
        if (y.norm() - 1.0).abs() > UNIT_TOL {
            return Ok(Verdict::Lose);
        }
        Ok(Verdict::from_bool(e.proj_norm(&y)? < kernel_threshold(self.d, self.d_tilde)))
    }
}

/// Play kernel discovery.
pub fn run_kernel_discovery(
    player: &mut dyn KernelPlayer,
    d: usize,
    d_tilde: usize,
    m: usize,
    seed: u64,
) -> Result<GameTranscript> {
    if d_tilde == 0 || d_tilde > d {
        return Err(GameError::Invalid(format!("need 1 ≤ d̃ ≤ d, got d = {d}, d̃ = {d_tilde}")));
    }
    let mut oracle_rng = stream(seed, "game/kernel/oracle", &[]);
    let mut player_rng = stream(seed, "game/kernel/player", &[]);
    let e = sample_subspace(d, d_tilde, &mut oracle_rng)?;
    let samples: Vec<DVector<f64>> = (0..m)
        .map(|_| e.basis() * random_unit_vector(d_tilde, &mut oracle_rng))
        .collect();
    if player.full_information() {
        player.observe_subspace(&e);
    }
    let y = player.output(d, &samples, &mut player_rng);
    if y.len() != d {
        return Err(GameError::Arity(format!("output has length {}, expected {d}", y.len())));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(GameError::Invalid("output is not finite".into()));
    }
    let mut notes = Vec::new();
    let norm = y.norm();
    if (norm - 1.0).abs() > UNIT_TOL {
        notes.push(format!("output norm {norm} is not 1"));
    }
    let proj = e.proj_norm(&y)?;
    let threshold = kernel_threshold(d, d_tilde);
    let record = KernelRecord {
        d,
        d_tilde,
        m,
        e_basis: to_columns(e.basis()),
        output: to_vec(&y),
        proj_norm: proj,
        threshold,
    };
    let verdict = record.judge()?;
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("proj_norm".into(), proj);
    diagnostics.insert("threshold".into(), threshold);
    Ok(GameTranscript {
        game: GameId::Kernel,
        seed,
        player: player.name(),
        record: GameRecord::Kernel(record),
        verdict,
        diagnostics,
        notes,
    })
}
