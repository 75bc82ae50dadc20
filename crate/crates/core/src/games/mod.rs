//! Simulators for the seven analysis games.
//!
//! Every runner takes a seed, splits it into an oracle stream and a player
//! stream, and returns a [`GameTranscript`]. The transcript stores enough of
//! the run (hidden subspaces, player outputs, per-step bookkeeping) for
//! [`GameTranscript::recheck`] to recompute the verdict without rerunning the
//! game, and to re-judge it under perturbed thresholds.

pub mod depth;
pub mod kernel;
pub mod osg;
pub mod players;
pub mod probing;
pub mod randfeas;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::oracle::OracleError;
use crate::params::ParamsError;
use crate::solvers::SolverError;
use crate::subspace::{Subspace, SubspaceError};

pub use depth::{run_depth_p_feasibility_game, DepthPlayer, DepthRecord, DepthSetup};
pub use kernel::{run_kernel_discovery, KernelPlayer, KernelRecord};
pub use osg::{
    run_adapted_osg, run_orthogonal_subspace_game, run_simplified_osg, OsgDecoder, OsgEncoder, OsgRecord,
    OsgSetup, OsgStrategy, OsgVariant,
};
pub use probing::{probing_level_values, run_probing_game, ProbingPlayer, ProbingRecord};
pub use randfeas::{run_randomized_feasibility_game, RandFeasPlayer, RandFeasRecord, RandFeasSetup};

/// Tolerance on `‖y‖ = 1` for player outputs.
pub const UNIT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GameId {
    Probing,
    Osg,
    OsgSimple,
    Kernel,
    Depth,
    RandFeas,
    AdaptedOsg,
}

impl GameId {
    pub const ALL: [GameId; 7] = [
        GameId::Probing,
        GameId::Osg,
        GameId::OsgSimple,
        GameId::Kernel,
        GameId::Depth,
        GameId::RandFeas,
        GameId::AdaptedOsg,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            GameId::Probing => "probing",
            GameId::Osg => "osg",
            GameId::OsgSimple => "osg-simple",
            GameId::Kernel => "kernel",
            GameId::Depth => "depth",
            GameId::RandFeas => "rand-feas",
            GameId::AdaptedOsg => "adapted-osg",
        }
    }
}

impl fmt::Display for GameId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GameId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        GameId::ALL
            .into_iter()
            .find(|g| g.as_str() == s)
            .ok_or_else(|| format!("unknown game `{s}`"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Win,
    Lose,
}

impl Verdict {
    pub fn from_bool(win: bool) -> Self {
        if win {
            Verdict::Win
        } else {
            Verdict::Lose
        }
    }

    pub fn is_win(&self) -> bool {
        *self == Verdict::Win
    }
}

#[derive(Debug, Error)]
pub enum GameError {
    #[error("invalid game input: {0}")]
    Invalid(String),
    #[error("player output has wrong arity: {0}")]
    Arity(String),
    #[error("index ĵ = {j_hat} out of range [0, {j})")]
    IndexOutOfRange { j_hat: usize, j: usize },
    #[error("malformed transcript: {0}")]
    Transcript(String),
    #[error(transparent)]
    Subspace(#[from] SubspaceError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, GameError>;

/// Game-specific content of a transcript.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GameRecord {
    Probing(ProbingRecord),
    Osg(OsgRecord),
    Kernel(KernelRecord),
    Depth(DepthRecord),
    RandFeas(RandFeasRecord),
}

/// Thresholds to re-judge a stored transcript with. `None` keeps the value
/// the game was played with.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Thresholds {
    pub rho: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameTranscript {
    pub game: GameId,
    pub seed: u64,
    pub player: String,
    pub record: GameRecord,
    pub verdict: Verdict,
    pub diagnostics: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl GameTranscript {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("transcript serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Recompute the verdict from the stored record.
    pub fn recheck(&self) -> Result<Verdict> {
        self.recheck_with(Thresholds::default())
    }

    pub fn recheck_with(&self, th: Thresholds) -> Result<Verdict> {
        match &self.record {
            GameRecord::Probing(r) => r.judge(th.rho),
            GameRecord::Osg(r) => r.judge(th.beta, th.gamma),
            GameRecord::Kernel(r) => r.judge(),
            GameRecord::Depth(r) => r.judge(),
            GameRecord::RandFeas(r) => r.judge(),
        }
    }

    pub fn is_win(&self) -> bool {
        self.verdict.is_win()
    }
}

/// Columns of a matrix, for serialization.
pub(crate) fn to_columns(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.column_iter().map(|c| c.iter().copied().collect()).collect()
}

pub(crate) fn to_vec(x: &DVector<f64>) -> Vec<f64> {
    x.iter().copied().collect()
}

pub(crate) fn from_columns(d: usize, cols: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    if cols.iter().any(|c| c.len() != d || c.iter().any(|v| !v.is_finite())) {
        return Err(GameError::Transcript(format!("columns must be finite and of length {d}")));
    }
    Ok(DMatrix::from_fn(d, cols.len(), |i, j| cols[j][i]))
}

pub(crate) fn vectors_from(d: usize, vs: &[Vec<f64>]) -> Result<Vec<DVector<f64>>> {
    vs.iter()
        .map(|v| {
            if v.len() != d || v.iter().any(|c| !c.is_finite()) {
                Err(GameError::Transcript(format!("vector must be finite and of length {d}")))
            } else {
                Ok(DVector::from_column_slice(v))
            }
        })
        .collect()
}

pub(crate) fn subspace_from(d: usize, cols: &[Vec<f64>]) -> Result<Subspace> {
    let m = from_columns(d, cols)?;
    Ok(Subspace::from_orthonormal(m)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn game_ids_roundtrip() {
        for g in GameId::ALL {
            assert_eq!(g.as_str().parse::<GameId>().unwrap(), g);
            let j = serde_json::to_string(&g).unwrap();
            assert_eq!(j, format!("\"{}\"", g.as_str()));
        }
        assert!("checkers".parse::<GameId>().is_err());
    }

    #[test]
    fn columns_roundtrip() {
        let m = DMatrix::from_fn(4, 2, |i, j| (i * 2 + j) as f64);
        assert_eq!(from_columns(4, &to_columns(&m)).unwrap(), m);
        assert!(from_columns(3, &to_columns(&m)).is_err());
    }
}
