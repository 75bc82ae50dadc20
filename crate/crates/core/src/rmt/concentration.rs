//! Monte-Carlo checks of the concentration bounds used by the lower-bound
//! arguments.
//!
//! Each check counts hits of one tail event over independent trials and
//! compares the frequency with the stated bound via [`TailVerdict`].

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Result, RmtError, TailVerdict};
use crate::rng::stream;
use crate::subspace::{gaussian_matrix, gaussian_vector, random_unit_vector, sample_subspace};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcConfig {
    /// Ambient dimension for the projection checks.
    pub d: usize,
    /// Rank of the fixed projection.
    pub r: usize,
    /// Dimension of the random subspace in the isometry check.
    pub s: usize,
    pub t_grid: Vec<f64>,
    /// Trials for the scalar projection tails.
    pub trials: usize,
    /// Trials for the subspace isometry check.
    pub subspace_trials: usize,
    /// Universal constant inside the isometry bound's union term.
    pub net_constant: f64,
    /// Gaussian dimension for the chi-square tails.
    pub gauss_n: usize,
    pub gauss_trials: usize,
    /// Shape `rows × cols`, `cols ≤ rows`, for the extreme singular values.
    pub rect_rows: usize,
    pub rect_cols: usize,
    pub rect_trials: usize,
    pub seed: u64,
}

impl Default for ConcConfig {
    fn default() -> Self {
        Self {
            d: 200,
            r: 50,
            s: 5,
            t_grid: vec![0.1, 0.25, 0.5, 1.0, 2.0],
            trials: 10_000,
            subspace_trials: 500,
            net_constant: 1.0,
            gauss_n: 20,
            gauss_trials: 100_000,
            rect_rows: 100,
            rect_cols: 25,
            rect_trials: 500,
            seed: 0,
        }
    }
}

impl ConcConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(RmtError::Invalid(m.into()));
        if self.r == 0 || self.r > self.d {
            return bad("need 1 ≤ r ≤ d");
        }
        if self.s == 0 || self.s > self.d {
            return bad("need 1 ≤ s ≤ d");
        }
        if self.t_grid.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return bad("t grid must be positive and finite");
        }
        if self.trials == 0 || self.subspace_trials == 0 || self.gauss_trials == 0 || self.rect_trials == 0 {
            return bad("trial counts must be positive");
        }
        if self.gauss_n == 0 || self.rect_cols == 0 || self.rect_cols > self.rect_rows {
            return bad("need gauss_n ≥ 1 and 1 ≤ rect_cols ≤ rect_rows");
        }
        if !(self.net_constant > 0.0) {
            return bad("net constant must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub name: String,
    pub t: f64,
    pub trials: usize,
    pub hits: usize,
    #[serde(flatten)]
    pub verdict: TailVerdict,
}

impl BoundCheck {
    fn new(name: &str, t: f64, hits: usize, trials: usize, bound: f64) -> Self {
        Self {
            name: name.into(),
            t,
            trials,
            hits,
            verdict: TailVerdict::new(hits, trials, bound),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcReport {
    pub config: ConcConfig,
    /// Empirical `E‖Px‖²` and its exact value `r/d`.
    pub mean_proj: f64,
    pub mean_proj_exact: f64,
    pub checks: Vec<BoundCheck>,
}

impl ConcReport {
    /// Every non-vacuous check passes.
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.verdict.passes)
    }

    pub fn table(&self) -> String {
        let mut s = String::from("check\tt\tempirical\tbound\tstatus\n");
        for c in &self.checks {
            let status = match (c.verdict.vacuous, c.verdict.passes) {
                (true, _) => "vacuous at this scale",
                (false, true) => "pass",
                (false, false) => "FAIL",
            };
            s.push_str(&format!("{}\t{}\t{:.6}\t{:.6}\t{}\n", c.name, c.t, c.verdict.empirical, c.verdict.bound, status));
        }
        s
    }
}

fn par_samples<F>(trials: usize, seed: u64, tag: &str, f: F) -> Vec<f64>
where
    F: Fn(&mut crate::rng::StreamRng) -> f64 + Sync,
{
    (0..trials)
        .into_par_iter()
        .map(|t| f(&mut stream(seed, tag, &[t as u64])))
        .collect()
}

fn count(xs: &[f64], pred: impl Fn(f64) -> bool) -> usize {
    xs.iter().filter(|&&x| pred(x)).count()
}

/// Run every check in `cfg`.
pub fn concentration_suite(cfg: &ConcConfig) -> Result<ConcReport> {
    cfg.validate()?;
    let (d, r) = (cfg.d, cfg.r);
    let (df, rf) = (d as f64, r as f64);
    let mut checks = Vec::new();

    // P = projection on the first r coordinates; x is rotation invariant.
    let proj = par_samples(cfg.trials, cfg.seed, "rmt/conc/projection", |rng| {
        let x = random_unit_vector(d, rng);
        x.rows(0, r).norm_squared()
    });
    let mean_proj = proj.iter().sum::<f64>() / cfg.trials as f64;
    let base = rf / df;
    for &t in &cfg.t_grid {
        let hits = count(&proj, |v| v >= base * (1.0 + t));
        checks.push(BoundCheck::new("projection-upper", t, hits, cfg.trials, (-(rf / 8.0) * t.min(t * t)).exp()));
        if t <= 1.0 {
            let hits = count(&proj, |v| v <= base * (1.0 - t));
            checks.push(BoundCheck::new("projection-lower", t, hits, cfg.trials, (-(rf / 4.0) * t * t).exp()));
        }
        if t >= 1.0 {
            let hits = count(&proj, |v| v <= base / t);
            let bound = (-(rf / 2.0) * t.ln() + df / (2.0 * std::f64::consts::E)).exp();
            checks.push(BoundCheck::new("projection-small", t, hits, cfg.trials, bound));
        }
    }

    // Extreme singular values of √(d/r)·P restricted to a random E.
    let s = cfg.s;
    let scale = (df / rf).sqrt();
    let sv: Vec<(f64, f64)> = (0..cfg.subspace_trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream(cfg.seed, "rmt/conc/subspace", &[t as u64]);
            let e = sample_subspace(d, s, &mut rng)?;
            let sig = (e.basis().rows(0, r).into_owned() * scale).singular_values();
            let lo = sig.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = sig.iter().copied().fold(0.0, f64::max);
            Ok((lo, hi))
        })
        .collect::<Result<Vec<_>>>()?;
    for &t in cfg.t_grid.iter().filter(|&&t| t <= 1.0) {
        let hits = sv.iter().filter(|(lo, hi)| *lo < 1.0 - t || *hi > 1.0 + t).count();
        let bound = (s as f64 * (cfg.net_constant * df / (rf * t)).ln() - rf * t * t / 32.0).exp();
        checks.push(BoundCheck::new("subspace-isometry", t, hits, cfg.subspace_trials, bound));
    }

    // Chi-square tails.
    let n = cfg.gauss_n as f64;
    let chi = par_samples(cfg.gauss_trials, cfg.seed, "rmt/conc/gaussian", |rng| {
        gaussian_vector(cfg.gauss_n, rng).norm_squared()
    });
    checks.push(BoundCheck::new("gaussian-norm-upper", n / 2.0, count(&chi, |v| v >= 4.0 * n), cfg.gauss_trials, (-n / 2.0).exp()));
    checks.push(BoundCheck::new("gaussian-norm-lower", n / 8.0, count(&chi, |v| v <= n / 4.0), cfg.gauss_trials, (-n / 8.0).exp()));
    for &t in &cfg.t_grid {
        let up = n + 2.0 * (n * t).sqrt() + 2.0 * t;
        checks.push(BoundCheck::new("chi-square-upper", t, count(&chi, |v| v >= up), cfg.gauss_trials, (-t).exp()));
        let lo = n - 2.0 * (n * t).sqrt();
        checks.push(BoundCheck::new("chi-square-lower", t, count(&chi, |v| v <= lo), cfg.gauss_trials, (-t).exp()));
    }

    // Extreme singular values of an N(0, 1/rows) rectangle.
    let (rows, cols) = (cfg.rect_rows, cfg.rect_cols);
    let beta = cols as f64 / rows as f64;
    let ext: Vec<(f64, f64)> = (0..cfg.rect_trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream(cfg.seed, "rmt/conc/rectangular", &[t as u64]);
            let m: DMatrix<f64> = gaussian_matrix(rows, cols, &mut rng) / (rows as f64).sqrt();
            let sig = m.singular_values();
            (sig.iter().copied().fold(f64::INFINITY, f64::min), sig.iter().copied().fold(0.0, f64::max))
        })
        .collect();
    for &t in &cfg.t_grid {
        let bound = (-(rows as f64) * t * t / 2.0).exp();
        let lo = ext.iter().filter(|(s, _)| *s <= 1.0 - beta.sqrt() - t).count();
        checks.push(BoundCheck::new("singular-min", t, lo, cfg.rect_trials, bound));
        let hi = ext.iter().filter(|(_, s)| *s >= 1.0 + beta.sqrt() + t).count();
        checks.push(BoundCheck::new("singular-max", t, hi, cfg.rect_trials, bound));
    }

    Ok(ConcReport {
        config: cfg.clone(),
        mean_proj,
        mean_proj_exact: base,
        checks,
    })
}
