//! The oblivious hard oracle.
//!
//! Depth-`p` probing subspaces come in `k`-tuples `V^{(p,a)}`, one per period
//! `[aT_p, (a+1)T_p)`, and a probe cut reports the smallest violated index of
//! the active tuple. Nothing depends on past queries: the answer at time `t`
//! is a function of the seed, `t` and the query alone.

use std::borrow::Cow;
use std::collections::HashMap;

use nalgebra::DVector;

use super::{
    check_query, e_vector, inscribed_ball_for, Ball, EventRecord, OracleError, OracleResponse,
    ResponseKind, Result, SeparationOracle,
};
use crate::params::{ParamsError, RandParams, Severity};
use crate::rng::{digest_hex, stream};
use crate::subspace::{sample_subspace, sample_subspace_within, OrthoBasis, Subspace};

/// Where the probing tuples come from.
#[derive(Clone, Debug)]
pub enum TupleSource {
    /// `V^{(p,a)}` drawn from the stream keyed by `(seed, p, a)`.
    Keyed { seed: u64 },
    /// Pre-sampled tuples: `tuples[p-1][a]`.
    Fixed(Vec<Vec<Vec<Subspace>>>),
}

#[derive(Clone, Debug)]
struct DepthState {
    period: Option<u64>,
    tuple: Vec<Subspace>,
    explo_span: OrthoBasis,
    count: usize,
}

/// Instrumentation counters.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RandStats {
    /// Probe-cut responses per depth.
    pub probe_cuts: Vec<u64>,
    /// Probe cuts whose minimal violated index exceeds `r_p + 1`, with `r_p`
    /// the exploratory count before the query.
    pub leaks: Vec<u64>,
    /// Probe cuts whose minimal violated index exceeds `r_p` counted after
    /// the query.
    pub strict_leaks: Vec<u64>,
    /// `histogram[p-1][i-1]`: probe cuts at depth p with minimal index i.
    pub index_histogram: Vec<Vec<u64>>,
    /// Queries answered deeper than depth q with `‖Proj_{E_q}(x)‖ > η_q`.
    pub improper_queries: Vec<u64>,
}

impl RandStats {
    pub fn leak_rate(&self) -> f64 {
        let cuts: u64 = self.probe_cuts.iter().sum();
        if cuts == 0 {
            0.0
        } else {
            self.leaks.iter().sum::<u64>() as f64 / cuts as f64
        }
    }

    pub fn strict_leak_rate(&self) -> f64 {
        let cuts: u64 = self.probe_cuts.iter().sum();
        if cuts == 0 {
            0.0
        } else {
            self.strict_leaks.iter().sum::<u64>() as f64 / cuts as f64
        }
    }

    pub fn merge(&mut self, other: &RandStats) {
        fn add(a: &mut Vec<u64>, b: &[u64]) {
            if a.len() < b.len() {
                a.resize(b.len(), 0);
            }
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        add(&mut self.probe_cuts, &other.probe_cuts);
        add(&mut self.leaks, &other.leaks);
        add(&mut self.strict_leaks, &other.strict_leaks);
        add(&mut self.improper_queries, &other.improper_queries);
        if self.index_histogram.len() < other.index_histogram.len() {
            self.index_histogram.resize(other.index_histogram.len(), Vec::new());
        }
        for (a, b) in self.index_histogram.iter_mut().zip(&other.index_histogram) {
            add(a, b);
        }
    }
}

#[derive(Clone, Debug)]
pub struct RandOracleState {
    params: RandParams,
    e_vec: DVector<f64>,
    e: Vec<Subspace>,
    e_span: OrthoBasis,
    source: TupleSource,
    depths: Vec<DepthState>,
    fingerprints: HashMap<(usize, u64), String>,
    t: u64,
    log: Vec<EventRecord>,
    logging: bool,
    stats: RandStats,
}

/// Indices `i` (1-based) with `‖Proj_{V_i}(x)‖ > δ_i`.
pub fn index_set(tuple: &[Subspace], x: &DVector<f64>, delta: &[f64]) -> Result<Vec<usize>> {
    if tuple.len() != delta.len() {
        return Err(OracleError::InjectedState(format!(
            "tuple of {} subspaces with {} thresholds",
            tuple.len(),
            delta.len()
        )));
    }
    let mut out = Vec::new();
    for (i, (v, &di)) in tuple.iter().zip(delta).enumerate() {
        if v.proj_norm(x)? > di {
            out.push(i + 1);
        }
    }
    Ok(out)
}

fn first_index(tuple: &[Subspace], x: &DVector<f64>, delta: &[f64]) -> Option<usize> {
    tuple
        .iter()
        .zip(delta)
        .position(|(v, &di)| v.proj_norm(x).map(|n| n > di).unwrap_or(false))
        .map(|i| i + 1)
}

fn tuple_fingerprint(tuple: &[Subspace]) -> String {
    let mut bytes = Vec::new();
    for v in tuple {
        bytes.extend(v.fingerprint_bytes());
    }
    digest_hex(&bytes)
}

fn check_params(params: &RandParams) -> Result<()> {
    let errors: Vec<_> = params
        .validate()
        .into_iter()
        .filter(|v| v.severity == Severity::Error)
        .collect();
    if !errors.is_empty() {
        return Err(ParamsError::AssumptionViolation(errors).into());
    }
    if params.l.max(params.l_last) > params.d_tilde {
        return Err(ParamsError::Infeasible(format!(
            "probe dimension {} exceeds d̃ = {}",
            params.l.max(params.l_last),
            params.d_tilde
        ))
        .into());
    }
    if params.period.iter().any(|&t| t == 0) {
        return Err(ParamsError::Infeasible("some period length T_p is zero".into()).into());
    }
    Ok(())
}

/// An oracle whose hidden subspaces and whole tuple schedule are keyed by `seed`.
pub fn new_rand_instance(params: &RandParams, seed: u64) -> Result<RandOracleState> {
    check_params(params)?;
    let e = (0..params.depth)
        .map(|p| sample_subspace(params.d, params.d_tilde, &mut stream(seed, "rand-oracle/E", &[p as u64])))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    RandOracleState::with_source(params, e, TupleSource::Keyed { seed })
}

impl RandOracleState {
    /// Oracle over given hidden subspaces and tuple source.
    pub fn with_source(params: &RandParams, e: Vec<Subspace>, source: TupleSource) -> Result<Self> {
        check_params(params)?;
        if e.len() != params.depth || e.iter().any(|s| s.ambient_dim() != params.d || s.dim() != params.d_tilde) {
            return Err(OracleError::InjectedState("hidden subspaces have the wrong shape".into()));
        }
        if let TupleSource::Fixed(t) = &source {
            if t.len() != params.depth || t.iter().flatten().any(|tup| tup.len() != params.k) {
                return Err(OracleError::InjectedState("fixed schedule has the wrong shape".into()));
            }
        }
        let d = params.d;
        Ok(Self {
            e_vec: e_vector(d),
            e_span: OrthoBasis::from_subspaces(d, &e),
            e,
            source,
            depths: (0..params.depth)
                .map(|_| DepthState {
                    period: None,
                    tuple: Vec::new(),
                    explo_span: OrthoBasis::new(d),
                    count: 0,
                })
                .collect(),
            fingerprints: HashMap::new(),
            t: 0,
            log: Vec::new(),
            logging: true,
            stats: RandStats {
                probe_cuts: vec![0; params.depth],
                leaks: vec![0; params.depth],
                strict_leaks: vec![0; params.depth],
                index_histogram: vec![vec![0; params.k]; params.depth],
                improper_queries: vec![0; params.depth],
            },
            params: params.clone(),
        })
    }

    pub fn params(&self) -> &RandParams {
        &self.params
    }

    pub fn e(&self) -> &[Subspace] {
        &self.e
    }

    pub fn e_vec(&self) -> &DVector<f64> {
        &self.e_vec
    }

    pub fn e_span(&self) -> &OrthoBasis {
        &self.e_span
    }

    /// The clock: number of queries answered so far.
    pub fn clock(&self) -> u64 {
        self.t
    }

    /// `r_p`: exploratory queries in the current depth-`p` period.
    pub fn exploratory_count(&self, p: usize) -> usize {
        self.depths[p - 1].count
    }

    /// Active period index at depth `p`, if a query has been answered.
    pub fn period_index(&self, p: usize) -> Option<u64> {
        self.depths[p - 1].period
    }

    pub fn stats(&self) -> &RandStats {
        &self.stats
    }

    pub fn log(&self) -> &[EventRecord] {
        &self.log
    }

    pub fn set_logging(&mut self, on: bool) {
        self.logging = on;
    }

    /// Fingerprints of every tuple used so far.
    pub fn fingerprints(&self) -> &HashMap<(usize, u64), String> {
        &self.fingerprints
    }

    /// The tuple `V^{(p,a)}` (1-based `p`).
    pub fn tuple(&self, p: usize, a: u64) -> Result<Vec<Subspace>> {
        match &self.source {
            TupleSource::Keyed { seed } => {
                let mut rng = stream(*seed, "rand-oracle/tuple", &[p as u64, a]);
                let l = self.params.l_at(p);
                (0..self.params.k)
                    .map(|_| Ok(sample_subspace_within(&self.e[p - 1], l, &mut rng)?))
                    .collect()
            }
            TupleSource::Fixed(t) => t[p - 1]
                .get(a as usize)
                .cloned()
                .ok_or(OracleError::ScheduleExhausted { depth: p, period: a }),
        }
    }

    fn active_tuple(&self, p: usize, t: u64) -> Result<Cow<'_, [Subspace]>> {
        let a = t / self.params.period_len(p);
        let st = &self.depths[p - 1];
        if st.period == Some(a) {
            Ok(Cow::Borrowed(&st.tuple))
        } else {
            Ok(Cow::Owned(self.tuple(p, a)?))
        }
    }

    /// The answer at time `t` to `x`, without touching any state.
    pub fn response_at(&self, t: u64, x: &DVector<f64>) -> Result<(OracleResponse, ResponseKind, Option<usize>)> {
        check_query(x, self.params.d)?;
        let mut firsts = Vec::with_capacity(self.params.depth);
        for p in 1..=self.params.depth {
            let tup = self.active_tuple(p, t)?;
            firsts.push(first_index(&tup, x, &self.params.delta[p - 1]));
        }
        Ok(self.answer(t, x, &firsts))
    }

    fn answer(&self, t: u64, x: &DVector<f64>, firsts: &[Option<usize>]) -> (OracleResponse, ResponseKind, Option<usize>) {
        if self.e_vec.dot(x) > -0.5 {
            return (
                OracleResponse::Cut {
                    g: self.e_vec.clone(),
                    depth: 0,
                },
                ResponseKind::Halfspace,
                None,
            );
        }
        for (p, first) in firsts.iter().enumerate() {
            if let Some(i) = *first {
                let v = match self.active_tuple(p + 1, t) {
                    Ok(t) => t[i - 1].clone(),
                    Err(_) => unreachable!("tuple already resolved"),
                };
                let proj = v.project(x).expect("dimension checked");
                let n = proj.norm();
                return (
                    OracleResponse::Cut {
                        g: proj / n,
                        depth: p + 1,
                    },
                    ResponseKind::Probe,
                    Some(i),
                );
            }
        }
        for (p, ep) in self.e.iter().enumerate() {
            let proj = ep.project(x).expect("dimension checked");
            let n = proj.norm();
            if n > self.params.delta[p][0] {
                return (
                    OracleResponse::Cut {
                        g: proj / n,
                        depth: p + 1,
                    },
                    ResponseKind::Fallback,
                    None,
                );
            }
        }
        (OracleResponse::Success, ResponseKind::Success, None)
    }

    fn roll(&mut self) -> Result<()> {
        for p in 1..=self.params.depth {
            let a = self.t / self.params.period_len(p);
            if self.depths[p - 1].period == Some(a) {
                continue;
            }
            let tuple = self.tuple(p, a)?;
            let fp = tuple_fingerprint(&tuple);
            if let Some(old) = self.fingerprints.get(&(p, a)) {
                assert_eq!(old, &fp, "tuple V^({p},{a}) changed after first use");
            } else {
                self.fingerprints.insert((p, a), fp);
            }
            let st = &mut self.depths[p - 1];
            st.period = Some(a);
            st.tuple = tuple;
            st.explo_span.clear();
            st.count = 0;
        }
        Ok(())
    }

    /// Answer `x` at the current clock, then advance the clock.
    pub fn step(&mut self, x: &DVector<f64>) -> Result<(OracleResponse, ResponseKind)> {
        check_query(x, self.params.d)?;
        self.roll()?;
        let big_p = self.params.depth;
        let firsts: Vec<Option<usize>> = (0..big_p)
            .map(|p| first_index(&self.depths[p].tuple, x, &self.params.delta[p]))
            .collect();

        let before: Vec<usize> = self.depths.iter().map(|s| s.count).collect();
        let mut exploratory = Vec::new();
        if self.e_vec.dot(x) <= -0.5 {
            for p in 0..big_p {
                if p > 0 && firsts[p - 1].is_some() {
                    break;
                }
                let st = &mut self.depths[p];
                if st.explo_span.residual(x) >= self.params.gamma[p] {
                    st.explo_span.push(x);
                    st.count += 1;
                    exploratory.push(p + 1);
                }
            }
        }

        let (response, kind, index) = self.answer(self.t, x, &firsts);
        let proj_norms: Vec<f64> = self.e.iter().map(|s| s.proj_norm(x).unwrap_or(f64::NAN)).collect();
        if let (ResponseKind::Probe, Some(i), Some(p)) = (kind, index, response.depth()) {
            let q = p - 1;
            self.stats.probe_cuts[q] += 1;
            self.stats.index_histogram[q][i - 1] += 1;
            if i > before[q] + 1 {
                self.stats.leaks[q] += 1;
            }
            if i > self.depths[q].count {
                self.stats.strict_leaks[q] += 1;
            }
        }
        let answered_at = match kind {
            ResponseKind::Halfspace => 0,
            ResponseKind::Probe => response.depth().unwrap_or(0),
            _ => big_p + 1,
        };
        for q in 0..answered_at.saturating_sub(1).min(big_p) {
            if proj_norms[q] > self.params.eta[q] {
                self.stats.improper_queries[q] += 1;
            }
        }
        if self.logging {
            self.log.push(EventRecord {
                t: self.t,
                depth: response.depth(),
                response_kind: kind,
                exploratory_depths: exploratory,
                resets: Vec::new(),
                proj_norms,
                period_index_per_depth: Some(self.depths.iter().map(|s| s.period.unwrap_or(0)).collect()),
                min_violated_index: index,
                r_p: Some(self.depths.iter().map(|s| s.count).collect()),
            });
        }
        self.t += 1;
        Ok((response, kind))
    }

    /// Membership in the feasible set with thresholds `δ_1^{(p)}`.
    pub fn membership(&self, x: &DVector<f64>) -> bool {
        x.len() == self.params.d
            && x.norm() <= 1.0
            && self.e_vec.dot(x) <= -0.5
            && self
                .e
                .iter()
                .zip(&self.params.delta)
                .all(|(s, row)| s.proj_norm(x).map(|v| v <= row[0]).unwrap_or(false))
    }
}

impl SeparationOracle for RandOracleState {
    fn dim(&self) -> usize {
        self.params.d
    }

    fn respond(&mut self, x: &DVector<f64>) -> Result<OracleResponse> {
        Ok(self.step(x)?.0)
    }

    fn contains(&self, x: &DVector<f64>) -> bool {
        self.membership(x)
    }

    fn inscribed_ball(&self) -> Result<Ball> {
        let thr = self
            .params
            .delta
            .iter()
            .map(|row| row[0])
            .fold(f64::INFINITY, f64::min);
        inscribed_ball_for(&self.e_vec, &self.e_span, thr)
    }

    fn epsilon(&self) -> f64 {
        self.params.epsilon
    }

    fn describe(&self) -> String {
        format!(
            "rand(d={},P={},k={},l={},l_P={},N={},eps={:e})",
            self.params.d, self.params.depth, self.params.k, self.params.l, self.params.l_last, self.params.n, self.params.epsilon
        )
    }
}
