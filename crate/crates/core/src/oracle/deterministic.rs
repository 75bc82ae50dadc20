//! The adaptive hard oracle.
//!
//! Each depth `p` owns a hidden subspace `E_p` and a growing list of probing
//! subspaces `V_1^{(p)} … V_{n_p}^{(p)} ⊂ E_p`. A query that lands in the
//! half-space, passes the probes of every depth `q ≤ p` and is robustly
//! independent of the depth-`p` exploratory queries seen so far is
//! *exploratory* at depth `p`; it earns a fresh probe. After `k` such queries
//! the depth-`p` period ends and every depth `q ≤ p` restarts.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};

use super::{
    check_query, e_vector, inscribed_ball_for, Ball, EventRecord, OracleError, OracleResponse,
    ResponseKind, Result, SeparationOracle,
};
use crate::params::{DetParams, Severity};
use crate::rng::StreamRng;
use crate::subspace::{sample_subspace, sample_subspace_within, OrthoBasis, Subspace};

#[derive(Clone, Debug)]
struct Level {
    probes: Vec<Subspace>,
    probe_span: OrthoBasis,
    explo: Vec<DVector<f64>>,
    explo_span: OrthoBasis,
    period: u64,
    improper: bool,
}

impl Level {
    fn new(d: usize) -> Self {
        Self {
            probes: Vec::new(),
            probe_span: OrthoBasis::new(d),
            explo: Vec::new(),
            explo_span: OrthoBasis::new(d),
            period: 0,
            improper: false,
        }
    }

    fn push(&mut self, x: &DVector<f64>, v: Subspace) {
        self.explo_span.push(x);
        self.explo.push(x.clone());
        self.probe_span.push_subspace(&v);
        self.probes.push(v);
    }

    fn clear(&mut self) {
        self.probes.clear();
        self.probe_span.clear();
        self.explo.clear();
        self.explo_span.clear();
    }
}

/// Outcome of one oracle call with its bookkeeping.
#[derive(Clone, Debug, PartialEq)]
pub struct StepReport {
    pub response: OracleResponse,
    pub kind: ResponseKind,
    /// Depths (1-based) at which the query was exploratory.
    pub exploratory: Vec<usize>,
    /// Depths whose exploratory count was full, triggering a reset of all
    /// depths at or below.
    pub resets: Vec<usize>,
    /// `‖Proj_{E_p}(x)‖` for each depth.
    pub proj_norms: Vec<f64>,
}

/// Counters for the proper-period instrumentation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PeriodStats {
    /// Completed periods per depth.
    pub completed: Vec<u64>,
    /// Completed periods per depth that saw a deeper query with
    /// `‖Proj_{E_q}(x)‖ > η_q`.
    pub improper: Vec<u64>,
    /// Deeper queries violating the η_q bound, per depth q.
    pub flagged_queries: Vec<u64>,
}

#[derive(Clone, Debug)]
pub struct DetOracleState {
    params: DetParams,
    e_vec: DVector<f64>,
    e: Vec<Subspace>,
    e_span: OrthoBasis,
    levels: Vec<Level>,
    rng: StreamRng,
    t: u64,
    log: Vec<EventRecord>,
    logging: bool,
    stats: PeriodStats,
}

fn check_params(params: &DetParams) -> Result<()> {
    let errors: Vec<_> = params
        .validate()
        .into_iter()
        .filter(|v| v.severity == Severity::Error)
        .collect();
    if !errors.is_empty() {
        return Err(crate::params::ParamsError::AssumptionViolation(errors).into());
    }
    if params.l.max(params.l_last) > params.d_tilde || params.d_tilde > params.d {
        return Err(crate::params::ParamsError::Infeasible(format!(
            "probe dimension {} exceeds d̃ = {}",
            params.l.max(params.l_last),
            params.d_tilde
        ))
        .into());
    }
    Ok(())
}

/// Sample `E_1 … E_P` and return a fresh oracle with all `n_p = 0`.
pub fn new_det_instance<R: Rng + ?Sized>(params: &DetParams, rng: &mut R) -> Result<DetOracleState> {
    check_params(params)?;
    let e = (0..params.depth)
        .map(|_| sample_subspace(params.d, params.d_tilde, rng))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let mut seed = [0u8; 32];
    rng.fill_bytes(&mut seed);
    let probe_rng = StreamRng::from_seed(seed);
    DetOracleState::assemble(params.clone(), e, probe_rng)
}

impl DetOracleState {
    fn assemble(params: DetParams, e: Vec<Subspace>, rng: StreamRng) -> Result<Self> {
        let d = params.d;
        let e_span = OrthoBasis::from_subspaces(d, &e);
        Ok(Self {
            levels: (0..params.depth).map(|_| Level::new(d)).collect(),
            stats: PeriodStats {
                completed: vec![0; params.depth],
                improper: vec![0; params.depth],
                flagged_queries: vec![0; params.depth],
            },
            e_vec: e_vector(d),
            e,
            e_span,
            params,
            rng,
            t: 0,
            log: Vec::new(),
            logging: true,
        })
    }

    /// Build a state from given hidden subspaces and injected per-depth
    /// probes and exploratory queries. `probes[p]` and `explo[p]` must have
    /// equal length at most `k`, and every probe must lie in its `E_p`.
    pub fn from_parts(
        params: &DetParams,
        e: Vec<Subspace>,
        probes: Vec<Vec<Subspace>>,
        explo: Vec<Vec<DVector<f64>>>,
        rng: StreamRng,
    ) -> Result<Self> {
        check_params(params)?;
        let big_p = params.depth;
        if e.len() != big_p || probes.len() != big_p || explo.len() != big_p {
            return Err(OracleError::InjectedState(format!(
                "expected {big_p} depths, got E: {}, probes: {}, exploratory: {}",
                e.len(),
                probes.len(),
                explo.len()
            )));
        }
        for (p, ep) in e.iter().enumerate() {
            if ep.ambient_dim() != params.d || ep.dim() != params.d_tilde {
                return Err(OracleError::InjectedState(format!("E_{} has wrong shape", p + 1)));
            }
        }
        let mut state = Self::assemble(params.clone(), e, rng)?;
        for (p, (vs, ys)) in probes.into_iter().zip(explo).enumerate() {
            if vs.len() != ys.len() || vs.len() > params.k {
                return Err(OracleError::InjectedState(format!(
                    "depth {}: {} probes, {} exploratory queries, k = {}",
                    p + 1,
                    vs.len(),
                    ys.len(),
                    params.k
                )));
            }
            for (v, y) in vs.into_iter().zip(ys) {
                if y.len() != params.d || y.iter().any(|c| !c.is_finite()) {
                    return Err(OracleError::InjectedState(format!(
                        "depth {}: malformed exploratory vector",
                        p + 1
                    )));
                }
                if v.dim() != params.l_at(p + 1) || state.e[p].containment_residual(&v)? > 1e-10 {
                    return Err(OracleError::InjectedState(format!(
                        "depth {}: probe not an l_p-dimensional subspace of E_p",
                        p + 1
                    )));
                }
                state.levels[p].push(&y, v);
            }
        }
        Ok(state)
    }

    pub fn params(&self) -> &DetParams {
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

    /// `n_p` for 1-based `p`.
    pub fn count(&self, p: usize) -> usize {
        self.levels[p - 1].probes.len()
    }

    pub fn probes(&self, p: usize) -> &[Subspace] {
        &self.levels[p - 1].probes
    }

    pub fn exploratory(&self, p: usize) -> &[DVector<f64>] {
        &self.levels[p - 1].explo
    }

    pub fn period_index(&self, p: usize) -> u64 {
        self.levels[p - 1].period
    }

    pub fn queries(&self) -> u64 {
        self.t
    }

    pub fn log(&self) -> &[EventRecord] {
        &self.log
    }

    pub fn set_logging(&mut self, on: bool) {
        self.logging = on;
    }

    pub fn period_stats(&self) -> &PeriodStats {
        &self.stats
    }

    /// Whether `x` is exploratory at depth `p` in the current state.
    pub fn is_exploratory(&self, x: &DVector<f64>, p: usize) -> bool {
        self.classify(x).get(p - 1).copied().unwrap_or(false)
    }

    fn classify(&self, x: &DVector<f64>) -> Vec<bool> {
        let mut out = vec![false; self.params.depth];
        if self.e_vec.dot(x) > -0.5 {
            return out;
        }
        for (p, level) in self.levels.iter().enumerate() {
            if level.probe_span.proj_norm(x) > self.params.delta[p] {
                break;
            }
            out[p] = level.explo_span.residual(x) >= self.params.delta[p];
        }
        out
    }

    fn finish_period(&mut self, p: usize) {
        let lvl = &mut self.levels[p];
        self.stats.completed[p] += 1;
        if lvl.improper {
            self.stats.improper[p] += 1;
        }
        lvl.improper = false;
        lvl.period += 1;
        lvl.clear();
    }

    fn fresh_probe(&mut self, p: usize) -> Result<Subspace> {
        let l = self.params.l_at(p + 1);
        Ok(sample_subspace_within(&self.e[p], l, &mut self.rng)?)
    }

    /// Answer `x` and update the exploratory bookkeeping.
    pub fn step(&mut self, x: &DVector<f64>) -> Result<StepReport> {
        check_query(x, self.params.d)?;
        self.t += 1;
        let flags = self.classify(x);
        let mut exploratory = Vec::new();
        let mut resets = Vec::new();
        for p in 0..self.params.depth {
            if !flags[p] {
                continue;
            }
            exploratory.push(p + 1);
            if self.levels[p].probes.len() < self.params.k {
                let v = self.fresh_probe(p)?;
                self.levels[p].push(x, v);
            } else {
                resets.push(p + 1);
                for q in 0..=p {
                    self.finish_period(q);
                    let v = self.fresh_probe(q)?;
                    self.levels[q].push(x, v);
                }
            }
        }

        let proj_norms: Vec<f64> = self.e.iter().map(|s| s.proj_norm(x).unwrap_or(f64::NAN)).collect();
        let (response, kind) = self.answer(x, &proj_norms);

        // Proper-period instrumentation: a query that passes the depth-q probes
        // and is answered deeper should be nearly orthogonal to E_q.
        let answered_at = match (&response, kind) {
            (_, ResponseKind::Halfspace) => 0,
            (OracleResponse::Cut { depth, .. }, ResponseKind::Probe) => *depth,
            _ => self.params.depth + 1,
        };
        for q in 0..answered_at.saturating_sub(1).min(self.params.depth) {
            if proj_norms[q] > self.params.eta[q] {
                self.levels[q].improper = true;
                self.stats.flagged_queries[q] += 1;
            }
        }

        if self.logging {
            self.log.push(EventRecord {
                t: self.t,
                depth: response.depth(),
                response_kind: kind,
                exploratory_depths: exploratory.clone(),
                resets: resets.clone(),
                proj_norms: proj_norms.clone(),
                period_index_per_depth: None,
                min_violated_index: None,
                r_p: None,
            });
        }
        Ok(StepReport {
            response,
            kind,
            exploratory,
            resets,
            proj_norms,
        })
    }

    fn answer(&self, x: &DVector<f64>, proj_norms: &[f64]) -> (OracleResponse, ResponseKind) {
        if self.e_vec.dot(x) > -0.5 {
            return (
                OracleResponse::Cut {
                    g: self.e_vec.clone(),
                    depth: 0,
                },
                ResponseKind::Halfspace,
            );
        }
        for (p, level) in self.levels.iter().enumerate() {
            if level.probe_span.proj_norm(x) > self.params.delta[p] {
                let proj = level.probe_span.project(x);
                let n = proj.norm();
                return (
                    OracleResponse::Cut {
                        g: proj / n,
                        depth: p + 1,
                    },
                    ResponseKind::Probe,
                );
            }
        }
        for (p, ep) in self.e.iter().enumerate() {
            if proj_norms[p] > self.params.delta[p] {
                let proj = ep.project(x).expect("dimension checked");
                let n = proj.norm();
                return (
                    OracleResponse::Cut {
                        g: proj / n,
                        depth: p + 1,
                    },
                    ResponseKind::Fallback,
                );
            }
        }
        (OracleResponse::Success, ResponseKind::Success)
    }

    /// Membership in `Q = B(0,1) ∩ {eᵀx ≤ −1/2} ∩ ⋂_p {‖Proj_{E_p}(x)‖ ≤ δ_p}`.
    pub fn membership(&self, x: &DVector<f64>) -> bool {
        x.len() == self.params.d
            && x.norm() <= 1.0
            && self.e_vec.dot(x) <= -0.5
            && self
                .e
                .iter()
                .zip(&self.params.delta)
                .all(|(s, &dp)| s.proj_norm(x).map(|v| v <= dp).unwrap_or(false))
    }

    /// Period-flag rate `improper / completed` per depth, counting the
    /// current period as well.
    pub fn improper_rates(&self) -> Vec<f64> {
        (0..self.params.depth)
            .map(|p| {
                let imp = self.stats.improper[p] + self.levels[p].improper as u64;
                let tot = self.stats.completed[p] + 1;
                imp as f64 / tot as f64
            })
            .collect()
    }
}

impl SeparationOracle for DetOracleState {
    fn dim(&self) -> usize {
        self.params.d
    }

    fn respond(&mut self, x: &DVector<f64>) -> Result<OracleResponse> {
        Ok(self.step(x)?.response)
    }

    fn contains(&self, x: &DVector<f64>) -> bool {
        self.membership(x)
    }

    fn inscribed_ball(&self) -> Result<Ball> {
        inscribed_ball_for(&self.e_vec, &self.e_span, self.params.delta[0])
    }

    fn epsilon(&self) -> f64 {
        self.params.epsilon
    }

    fn describe(&self) -> String {
        format!(
            "det(d={},P={},k={},l={},l_P={},eps={:e})",
            self.params.d, self.params.depth, self.params.k, self.params.l, self.params.l_last, self.params.epsilon
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{certify_separation, sample_cap};
    use crate::params::{compute_det, lab, Mode};
    use crate::rng::stream;
    use crate::subspace::random_unit_vector;
    use proptest::prelude::*;

    fn lab80() -> DetParams {
        compute_det(80, 2, 2, 1.0, None, lab(Some(2), None, None), Mode::Lab).unwrap()
    }

    #[test]
    fn fresh_state() {
        let p = lab80();
        let o = new_det_instance(&p, &mut stream(1, "e", &[])).unwrap();
        assert!((1..=2).all(|q| o.count(q) == 0));
        assert!(o.e().iter().all(|s| s.dim() == p.d_tilde));
        assert_eq!(o.e_span().dim(), 2 * p.d_tilde);
    }

    #[test]
    fn minus_e_first_query() {
        let p = lab80();
        let mut o = new_det_instance(&p, &mut stream(2, "e", &[])).unwrap();
        let x = -o.e_vec().clone();
        assert!(o.is_exploratory(&x, 1) && o.is_exploratory(&x, 2));
        let rep = o.step(&x).unwrap();
        assert_eq!(rep.exploratory, vec![1, 2]);
        assert_eq!((o.count(1), o.count(2)), (1, 1));
        // −e is far from orthogonal to E_1, so some cut comes back.
        assert!(!rep.response.is_success());
        assert!(!o.is_exploratory(&x, 2));
    }

    #[test]
    fn e_cut_and_zero() {
        let p = lab80();
        let mut o = new_det_instance(&p, &mut stream(3, "e", &[])).unwrap();
        let e = o.e_vec().clone();
        assert_eq!(
            o.step(&e).unwrap().response,
            OracleResponse::Cut { g: e.clone(), depth: 0 }
        );
        let z = DVector::zeros(80);
        assert!(!o.membership(&z));
        assert!(!o.is_exploratory(&z, 1));
    }

    #[test]
    fn rejects_outside_ball() {
        let p = lab80();
        let mut o = new_det_instance(&p, &mut stream(4, "e", &[])).unwrap();
        let x = DVector::from_element(80, 1.0);
        assert!(matches!(o.step(&x), Err(OracleError::QueryNorm(_))));
    }

    #[test]
    fn inscribed_points_succeed() {
        let p = lab80();
        let mut rng = stream(5, "e", &[]);
        let mut o = new_det_instance(&p, &mut rng).unwrap();
        let ball = o.inscribed_ball().unwrap();
        for _ in 0..50 {
            let x = ball.sample(&mut rng);
            assert!(o.membership(&x));
            assert_eq!(o.step(&x).unwrap().response, OracleResponse::Success);
        }
        let f = ball.center.clone() / (1.0 - ball.radius);
        assert!(o.membership(&f));
        let xc = sample_cap(&f, ball.radius, &mut rng).unwrap();
        assert!(o.membership(&xc));
    }

    #[test]
    fn reset_semantics() {
        let p = lab80();
        let mut rng = stream(6, "e", &[]);
        let mut o = new_det_instance(&p, &mut rng).unwrap();
        // Queries orthogonal to E_1 and E_2 in the half-space are exploratory
        // at every depth; k = 2, so the third one resets both depths.
        let mut span = o.e_span().clone();
        span.push(&o.e_vec().clone());
        let (f, _) = crate::oracle::feasible_direction(o.e_vec(), o.e_span());
        for i in 0..3 {
            let u = crate::subspace::random_unit_orthogonal(&span, &mut rng).unwrap();
            span.push(&u);
            let x = &f * 0.8 + u * 0.5;
            let rep = o.step(&x).unwrap();
            assert_eq!(rep.exploratory, vec![1, 2]);
            if i == 2 {
                assert_eq!(rep.resets, vec![1, 2]);
                assert_eq!((o.count(1), o.count(2)), (1, 1));
                assert_eq!(o.period_index(1), 2);
                assert_eq!(o.period_index(2), 1);
            }
        }
        let last = o.log().last().unwrap();
        assert_eq!(last.resets, vec![1, 2]);
    }

    #[test]
    fn replayed_query_not_exploratory() {
        let p = lab80();
        let mut rng = stream(7, "e", &[]);
        let mut o = new_det_instance(&p, &mut rng).unwrap();
        let (f, _) = crate::oracle::feasible_direction(o.e_vec(), o.e_span());
        let x = &f * 0.9;
        o.step(&x).unwrap();
        assert_eq!(o.count(1), 1);
        assert!(!o.is_exploratory(&x, 1));
    }

    #[test]
    fn adversarial_certificate_fails() {
        let p = lab80();
        let mut rng = stream(8, "e", &[]);
        let mut o = new_det_instance(&p, &mut rng).unwrap();
        let x = random_unit_vector(80, &mut rng) * 0.5;
        if let OracleResponse::Cut { g, .. } = o.step(&x).unwrap().response {
            assert!(certify_separation(&o, &x, &g, 200, &mut rng).unwrap());
            assert!(!certify_separation(&o, &x, &(-g), 200, &mut rng).unwrap());
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn run_invariants(seed in any::<u64>(), steps in 1usize..60) {
            let p = lab80();
            let mut rng = stream(seed, "prop", &[]);
            let mut o = new_det_instance(&p, &mut rng).unwrap();
            let (f, _) = crate::oracle::feasible_direction(o.e_vec(), o.e_span());
            let mut replay = new_det_instance(&p, &mut stream(seed, "prop", &[])).unwrap();
            for _ in 0..steps {
                let u = random_unit_vector(80, &mut rng);
                let w: f64 = rng.random();
                let x = (&f * w + u * (1.0 - w)).normalize() * rng.random::<f64>();
                let rep = o.step(&x).unwrap();
                prop_assert_eq!(&replay.step(&x).unwrap(), &rep);
                for q in 1..=2 {
                    prop_assert_eq!(o.probes(q).len(), o.count(q));
                    prop_assert_eq!(o.exploratory(q).len(), o.count(q));
                    for v in o.probes(q) {
                        prop_assert!(o.e()[q - 1].containment_residual(v).unwrap() <= 1e-10);
                    }
                }
                for &r in &rep.resets {
                    for q in 1..=r {
                        prop_assert_eq!(o.count(q), 1);
                    }
                }
                match &rep.response {
                    OracleResponse::Success => prop_assert!(o.membership(&x)),
                    OracleResponse::Cut { g, depth } => {
                        prop_assert!((g.norm() - 1.0).abs() < 1e-10);
                        for q in 1..*depth {
                            let span = OrthoBasis::from_subspaces(80, o.probes(q));
                            prop_assert!(span.proj_norm(&x) <= p.delta[q - 1] || rep.kind == ResponseKind::Fallback);
                        }
                    }
                }
            }
        }
    }
}
