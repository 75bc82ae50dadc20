//! Separation oracles for the hard feasibility instances.
//!
//! [`deterministic`] adapts its probing subspaces to the queries it sees;
//! [`randomized`] follows a fixed schedule keyed only by the clock.

pub mod deterministic;
pub mod randomized;

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::ParamsError;
use crate::subspace::{random_unit_vector, OrthoBasis, SubspaceError};

pub use deterministic::{new_det_instance, DetOracleState};
pub use randomized::{new_rand_instance, RandOracleState};

/// Queries with norm above `1 + QUERY_NORM_TOL` are rejected.
pub const QUERY_NORM_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("query norm {0} exceeds 1")]
    QueryNorm(f64),
    #[error("query has a non-finite entry")]
    NonFinite,
    #[error("query dimension {got}, oracle dimension {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("no inscribed ball: ‖Proj⊥(e)‖ = {norm} is below {needed}")]
    InscribedBall { norm: f64, needed: f64 },
    #[error("invalid injected state: {0}")]
    InjectedState(String),
    #[error("schedule exhausted at depth {depth}, period {period}")]
    ScheduleExhausted { depth: usize, period: u64 },
    #[error(transparent)]
    Subspace(#[from] SubspaceError),
    #[error(transparent)]
    Params(#[from] ParamsError),
}

pub type Result<T> = std::result::Result<T, OracleError>;

/// Oracle answer: either the query is feasible, or a unit normal `g` with
/// `gᵀ(x′ − x) < 0` for every feasible `x′`.
#[derive(Clone, Debug, PartialEq)]
pub enum OracleResponse {
    Success,
    /// `depth` is 0 for the half-space cut along `e`.
    Cut { g: DVector<f64>, depth: usize },
}

impl OracleResponse {
    pub fn is_success(&self) -> bool {
        matches!(self, OracleResponse::Success)
    }

    pub fn depth(&self) -> Option<usize> {
        match self {
            OracleResponse::Success => None,
            OracleResponse::Cut { depth, .. } => Some(*depth),
        }
    }

    pub fn cut(&self) -> Option<&DVector<f64>> {
        match self {
            OracleResponse::Success => None,
            OracleResponse::Cut { g, .. } => Some(g),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResponseKind {
    Halfspace,
    Probe,
    Fallback,
    Success,
}

/// One line of the oracle event log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventRecord {
    pub t: u64,
    /// `None` for Success.
    pub depth: Option<usize>,
    pub response_kind: ResponseKind,
    pub exploratory_depths: Vec<usize>,
    pub resets: Vec<usize>,
    /// `‖Proj_{E_p}(x)‖` for p = 1..P.
    pub proj_norms: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period_index_per_depth: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_violated_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_p: Option<Vec<usize>>,
}

impl EventRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("event serializes")
    }

    pub fn from_json_line(line: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(line.trim_end())
    }
}

/// Write an event log as line-delimited JSON.
pub fn write_event_log<W: std::io::Write>(events: &[EventRecord], mut w: W) -> std::io::Result<()> {
    for e in events {
        writeln!(w, "{}", e.to_json_line())?;
    }
    Ok(())
}

/// Parse a line-delimited JSON event log; blank lines are skipped.
pub fn read_event_log(text: &str) -> std::result::Result<Vec<EventRecord>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(EventRecord::from_json_line)
        .collect()
}

/// A Euclidean ball.
#[derive(Clone, Debug, PartialEq)]
pub struct Ball {
    pub center: DVector<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        sample_in_ball(&self.center, self.radius, rng)
    }
}

/// Common interface of the hard oracles, used by the solver driver.
pub trait SeparationOracle {
    fn dim(&self) -> usize;
    fn respond(&mut self, x: &DVector<f64>) -> Result<OracleResponse>;
    /// Membership in the feasible set.
    fn contains(&self, x: &DVector<f64>) -> bool;
    /// A ball inside the feasible set.
    fn inscribed_ball(&self) -> Result<Ball>;
    /// The accuracy the instance is built for.
    fn epsilon(&self) -> f64;
    fn describe(&self) -> String;
}

/// The fixed half-space direction `e = e₁`.
pub fn e_vector(d: usize) -> DVector<f64> {
    let mut e = DVector::zeros(d);
    e[0] = 1.0;
    e
}

pub(crate) fn check_query(x: &DVector<f64>, d: usize) -> Result<()> {
    if x.len() != d {
        return Err(OracleError::Dimension {
            expected: d,
            got: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(OracleError::NonFinite);
    }
    let n = x.norm();
    if n > 1.0 + QUERY_NORM_TOL {
        return Err(OracleError::QueryNorm(n));
    }
    Ok(())
}

/// Uniform point in `B(center, r)`.
pub fn sample_in_ball<R: Rng + ?Sized>(center: &DVector<f64>, r: f64, rng: &mut R) -> DVector<f64> {
    let d = center.len();
    let u = random_unit_vector(d, rng);
    let s: f64 = rng.random::<f64>().powf(1.0 / d as f64);
    center + u * (r * s)
}

/// The unit direction `f = −Proj⊥(e)/‖Proj⊥(e)‖`, where ⊥ is the orthogonal
/// complement of `span(E_1 … E_P)`, together with `‖Proj⊥(e)‖`.
pub fn feasible_direction(e: &DVector<f64>, e_span: &OrthoBasis) -> (DVector<f64>, f64) {
    let r = e_span.residual_vector(e);
    let n = r.norm();
    (-r / n.max(f64::MIN_POSITIVE), n)
}

/// Ball `B((1 − r)f, r)` with `r = threshold/2`, inside the feasible set when
/// `(1 − r)‖Proj⊥(e)‖ ≥ 1/2 + r`.
pub fn inscribed_ball_for(e: &DVector<f64>, e_span: &OrthoBasis, threshold: f64) -> Result<Ball> {
    let (f, norm) = feasible_direction(e, e_span);
    let r = threshold / 2.0;
    let needed = (0.5 + r) / (1.0 - r);
    if r >= 1.0 || norm.is_nan() || norm < needed {
        return Err(OracleError::InscribedBall { norm, needed });
    }
    Ok(Ball {
        center: f * (1.0 - r),
        radius: r,
    })
}

/// Uniform sample of `B(f, r) ∩ B(0, 1)` by rejection.
pub fn sample_cap<R: Rng + ?Sized>(f: &DVector<f64>, r: f64, rng: &mut R) -> Option<DVector<f64>> {
    for _ in 0..10_000 {
        let x = sample_in_ball(f, r, rng);
        if x.norm() <= 1.0 {
            return Some(x);
        }
    }
    None
}

/// Check `gᵀ(x′ − x) < 0` on `samples` random points of the oracle's
/// inscribed ball, plus the ball point that maximises `gᵀx′`.
pub fn certify_separation<O: SeparationOracle + ?Sized, R: Rng + ?Sized>(
    oracle: &O,
    x: &DVector<f64>,
    g: &DVector<f64>,
    samples: usize,
    rng: &mut R,
) -> Result<bool> {
    let ball = oracle.inscribed_ball()?;
    let gn = g.norm();
    if !(gn.is_finite() && gn > 0.0) {
        return Ok(false);
    }
    let extremal = &ball.center + g * (ball.radius / gn);
    if g.dot(&(&extremal - x)) >= 0.0 {
        return Ok(false);
    }
    for _ in 0..samples {
        let xp = ball.sample(rng);
        if g.dot(&(xp - x)) >= 0.0 {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn event_line_roundtrip() {
        let ev = EventRecord {
            t: 3,
            depth: Some(1),
            response_kind: ResponseKind::Probe,
            exploratory_depths: vec![1, 2],
            resets: vec![],
            proj_norms: vec![0.1, 0.25],
            period_index_per_depth: Some(vec![0, 1]),
            min_violated_index: Some(2),
            r_p: None,
        };
        let line = ev.to_json_line();
        assert!(!line.contains("r_p"));
        assert_eq!(EventRecord::from_json_line(&line).unwrap(), ev);
        let log = read_event_log(&format!("{line}\n\n{line}\n")).unwrap();
        assert_eq!(log.len(), 2);
    }

    #[test]
    fn rejects_bad_queries() {
        let x = DVector::from_vec(vec![1.0, 1.0]);
        assert!(matches!(check_query(&x, 2), Err(OracleError::QueryNorm(_))));
        let x = DVector::from_vec(vec![f64::NAN, 0.0]);
        assert_eq!(check_query(&x, 2), Err(OracleError::NonFinite));
        let x = DVector::from_vec(vec![0.0]);
        assert!(matches!(check_query(&x, 2), Err(OracleError::Dimension { .. })));
    }
}
