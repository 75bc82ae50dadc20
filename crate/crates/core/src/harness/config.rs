use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::{HarnessError, Result};
use crate::games::GameId;
use crate::params::{compute_det, compute_rand, d_tilde, deterministic_params, randomized_params, Constants, DetParams, Mode, RandParams};
use crate::rmt::ConcConfig;
use crate::rng::digest_hex;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Feas,
    Game,
    RmtSweep,
    ConcSuite,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Feas => "feas",
            ExperimentKind::Game => "game",
            ExperimentKind::RmtSweep => "rmt-sweep",
            ExperimentKind::ConcSuite => "conc-suite",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OracleKind {
    #[default]
    Deterministic,
    Randomized,
}

/// One experiment. Every stream used by a run is derived from `seed`; `out`
/// and `jobs` affect where and how fast, never what.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub game: Option<GameId>,
    pub d: usize,
    #[serde(rename = "P")]
    pub depth: usize,
    pub k: usize,
    pub alpha: f64,
    #[serde(rename = "l_P", default, skip_serializing_if = "Option::is_none")]
    pub l_last: Option<usize>,
    /// Probe dimension `l` below depth P, or the probing-game subspace dimension.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<usize>,
    #[serde(rename = "M_bits", default, skip_serializing_if = "Option::is_none")]
    pub m_bits: Option<usize>,
    /// Solver for `feas`, player for `game`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    pub trials: usize,
    pub seed: u64,
    pub mode: Mode,
    #[serde(default)]
    pub oracle: OracleKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<u64>,
    /// Replaces the default lab constants entirely.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constants: Option<Constants>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_rand: Option<f64>,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n_override: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_tilde: Option<usize>,
    /// Sample count `m` for the OSG and kernel games.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Index count `J` (adapted OSG, randomized feasibility).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j: Option<usize>,
    /// Game depth `p` for the depth game.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    /// Band factors for `rmt-sweep`; `d` is the row count there.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_values: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conc: Option<ConcConfig>,
    /// Certify every cut of a `feas` run against the inscribed ball.
    #[serde(default)]
    pub certify: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, d: usize, depth: usize, k: usize) -> Self {
        Self {
            kind,
            game: None,
            d,
            depth,
            k,
            alpha: 1.0,
            l_last: None,
            l: None,
            m_bits: None,
            solver: None,
            eps: None,
            trials: 1,
            seed: 0,
            mode: Mode::Lab,
            oracle: OracleKind::Deterministic,
            t_max: None,
            constants: None,
            mu_factor: None,
            c_rand: None,
            n_override: None,
            d_tilde: None,
            samples: None,
            rho: None,
            beta: None,
            gamma: None,
            j: None,
            p: None,
            c_values: None,
            conc: None,
            certify: false,
            jobs: None,
            out: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| HarnessError::Config(format!("config: {e}")))
    }

    /// Digest of everything that determines results.
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.jobs = None;
        c.out = None;
        digest_hex(serde_json::to_string(&c).expect("config serializes").as_bytes())
    }

    /// Name used in the `kind` column.
    pub fn kind_label(&self) -> String {
        match (self.kind, self.game) {
            (ExperimentKind::Game, Some(g)) => format!("game-{g}"),
            (k, _) => k.as_str().to_string(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.d == 0 {
            return bad("d must be at least 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad(format!("alpha = {} not in (0, 1]", self.alpha));
        }
        if self.kind == ExperimentKind::Game && self.game.is_none() {
            return bad("game experiments need a game".into());
        }
        if self.jobs == Some(0) {
            return bad("jobs must be at least 1".into());
        }
        if let Some(e) = self.eps {
            if !(e > 0.0 && e.is_finite()) {
                return bad(format!("eps = {e} must be positive"));
            }
        }
        Ok(())
    }

    /// `⌊d/(2P)⌋`, or the explicit value.
    pub fn resolved_d_tilde(&self) -> usize {
        self.d_tilde.unwrap_or_else(|| if self.depth == 0 { self.d } else { d_tilde(self.d, self.depth) })
    }

    /// Lab default probe dimension, `max(1, ⌊d̃/(4k)⌋)`.
    pub fn lab_default_l(&self) -> usize {
        (self.resolved_d_tilde() / (4 * self.k.max(1))).max(1)
    }

    /// Constants handed to the parameter ladders.
    pub fn resolved_constants(&self) -> Constants {
        if let Some(c) = &self.constants {
            return c.clone();
        }
        let mut c = Constants::default();
        if let Some(r) = self.c_rand {
            c.c_rand = r;
        }
        if self.mode == Mode::Lab {
            c.mu_factor = Some(self.mu_factor.unwrap_or(1.0));
            c.eps_target = self.eps;
            c.n_override = self.n_override;
            let use_formula = self.oracle == OracleKind::Randomized && self.c_rand.is_some();
            c.l_override = self.l.or(if use_formula { None } else { Some(self.lab_default_l()) });
        }
        c
    }

    pub fn det_params(&self) -> Result<DetParams> {
        let c = self.resolved_constants();
        let p = match self.mode {
            Mode::Strict => deterministic_params(self.d, self.depth, self.k, self.alpha, self.l_last, c, Mode::Strict)?,
            Mode::Lab => compute_det(self.d, self.depth, self.k, self.alpha, self.l_last, c, Mode::Lab)?,
        };
        Ok(p)
    }

    pub fn rand_params(&self) -> Result<RandParams> {
        let c = self.resolved_constants();
        let p = match self.mode {
            Mode::Strict => randomized_params(self.d, self.depth, self.k, self.l_last, c, Mode::Strict)?,
            Mode::Lab => compute_rand(self.d, self.depth, self.k, self.l_last, c, Mode::Lab)?,
        };
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn lab_defaults() {
        let c = ExperimentConfig { eps: Some(1e-3), ..ExperimentConfig::new(ExperimentKind::Feas, 30, 2, 2) };
        assert_eq!(c.lab_default_l(), 1);
        let p = c.det_params().unwrap();
        assert_eq!(p.l, 1);
        assert!((p.epsilon - 1e-3).abs() < 1e-15);
        let strict = ExperimentConfig { mode: Mode::Strict, eps: None, ..c };
        assert!(matches!(strict.det_params(), Err(HarnessError::Config(_))));
    }

    #[test]
    fn digest_ignores_placement() {
        let a = ExperimentConfig::new(ExperimentKind::Feas, 30, 2, 2);
        let b = ExperimentConfig { jobs: Some(4), out: Some("x.csv".into()), ..a.clone() };
        assert_eq!(a.digest(), b.digest());
        assert_ne!(a.digest(), ExperimentConfig { seed: 1, ..a }.digest());
    }

    #[test]
    fn rejects_unknown_fields() {
        assert!(ExperimentConfig::from_json(r#"{"kind":"feas","d":3,"P":1,"k":1,"alpha":1,"trials":1,"seed":0,"mode":"lab","bogus":1}"#).is_err());
    }

    proptest! {
        #[test]
        fn json_roundtrip(d in 1usize..10_000, k in 1usize..50, seed in any::<u64>(), eps in proptest::option::of(1e-9f64..1.0),
                          trials in 1usize..100, rho in proptest::option::of(0.0f64..1.0), cs in proptest::option::of(proptest::collection::vec(2usize..100, 0..5))) {
            let c = ExperimentConfig {
                eps, rho, c_values: cs, seed, trials,
                game: Some(GameId::Probing),
                ..ExperimentConfig::new(ExperimentKind::Game, d, 2, k)
            };
            prop_assert_eq!(ExperimentConfig::from_json(&c.to_json()).unwrap(), c);
        }
    }
}
