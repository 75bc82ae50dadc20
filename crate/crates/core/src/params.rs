//! Parameter ladders for the deterministic and randomized constructions.
//!
//! Both are pure functions of their inputs. `strict` mode rejects parameter
//! sets that break the construction's standing assumptions; `lab` mode accepts
//! them with warnings and allows constant overrides so runs fit on a desk.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Strict,
    Lab,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Strict => "strict",
            Mode::Lab => "lab",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = ParamsError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "strict" => Ok(Mode::Strict),
            "lab" => Ok(Mode::Lab),
            other => Err(ParamsError::Invalid(format!("unknown mode {other:?}"))),
        }
    }
}

/// Tunable constants. Everything except `c2` and `c_rand` is a lab override.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constants {
    #[serde(rename = "C2")]
    pub c2: f64,
    #[serde(rename = "C_rand")]
    pub c_rand: f64,
    /// Replaces the 600 (deterministic) or 1200 (randomized) factor in μ, μ_P.
    #[serde(default)]
    pub mu_factor: Option<f64>,
    /// Replaces the formula value of l.
    #[serde(default)]
    pub l_override: Option<usize>,
    /// Rescales the η/δ ladder by a common factor so that ε equals this value.
    #[serde(default)]
    pub eps_target: Option<f64>,
    /// Replaces N (and N_P) in the randomized construction.
    #[serde(default)]
    pub n_override: Option<usize>,
}

impl Default for Constants {
    fn default() -> Self {
        Self {
            c2: 8.0,
            c_rand: 1.0,
            mu_factor: None,
            l_override: None,
            eps_target: None,
            n_override: None,
        }
    }
}

impl Constants {
    fn has_overrides(&self) -> bool {
        self.mu_factor.is_some()
            || self.l_override.is_some()
            || self.eps_target.is_some()
            || self.n_override.is_some()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

/// A violated standing assumption.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// The inequality, e.g. `"4 l_q k ≤ d̃"`.
    pub inequality: String,
    /// Which part of the construction relies on it.
    pub context: String,
    /// The offending values.
    pub actual: String,
    pub severity: Severity,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{:?}: {} ({}; needed by {})",
            self.severity, self.inequality, self.actual, self.context
        )
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamsError {
    #[error("assumption violated: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    AssumptionViolation(Vec<Violation>),
    #[error("derived quantity {0} underflows or is not finite")]
    Underflow(String),
    #[error("infeasible parameters: {0}")]
    Infeasible(String),
    #[error("invalid parameters: {0}")]
    Invalid(String),
}

/// Hypothesis of the final lower bound: `c (M + dP ln d)/d · P³ ln d ≤ k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub memory_bits: f64,
    pub c: f64,
}

fn push(
    out: &mut Vec<Violation>,
    mode: Mode,
    ok: bool,
    inequality: &str,
    context: &str,
    actual: String,
) {
    if !ok {
        out.push(Violation {
            inequality: inequality.to_string(),
            context: context.to_string(),
            actual,
            severity: match mode {
                Mode::Strict => Severity::Error,
                Mode::Lab => Severity::Warning,
            },
        });
    }
}

fn check_finite(name: &str, xs: &[f64]) -> Result<(), ParamsError> {
    if xs.iter().all(|v| v.is_finite() && *v > 0.0) {
        Ok(())
    } else {
        Err(ParamsError::Underflow(name.to_string()))
    }
}

fn common_checks(d: usize, depth: usize, k: usize, mode: Mode, c: &Constants) -> Result<(), ParamsError> {
    if d == 0 || k == 0 || depth == 0 {
        return Err(ParamsError::Invalid("d, P and k must be positive".into()));
    }
    if mode == Mode::Strict && depth < 2 {
        return Err(ParamsError::AssumptionViolation(vec![Violation {
            inequality: "P ≥ 2".into(),
            context: "nested construction".into(),
            actual: format!("P = {depth}"),
            severity: Severity::Error,
        }]));
    }
    if mode == Mode::Strict && c.has_overrides() {
        return Err(ParamsError::Invalid(
            "constant overrides require lab mode".into(),
        ));
    }
    if !(c.c2.is_finite() && c.c2 > 0.0 && c.c_rand.is_finite() && c.c_rand > 0.0) {
        return Err(ParamsError::Invalid("C2 and C_rand must be positive".into()));
    }
    if let Some(m) = c.mu_factor {
        if !(m.is_finite() && m > 0.0) {
            return Err(ParamsError::Invalid("mu_factor must be positive".into()));
        }
    }
    if let Some(e) = c.eps_target {
        if !(e.is_finite() && e > 0.0) {
            return Err(ParamsError::Invalid("eps_target must be positive".into()));
        }
    }
    if c.l_override == Some(0) {
        return Err(ParamsError::Invalid("l_override must be positive".into()));
    }
    if c.n_override == Some(0) {
        return Err(ParamsError::Invalid("n_override must be positive".into()));
    }
    Ok(())
}

/// Deterministic construction parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetParams {
    pub d: usize,
    #[serde(rename = "P")]
    pub depth: usize,
    pub k: usize,
    pub alpha: f64,
    #[serde(rename = "l_P")]
    pub l_last: usize,
    pub d_tilde: usize,
    pub l: usize,
    /// η_1 … η_P.
    pub eta: Vec<f64>,
    pub mu: f64,
    #[serde(rename = "mu_P")]
    pub mu_last: f64,
    /// δ_1 … δ_P.
    pub delta: Vec<f64>,
    pub epsilon: f64,
    #[serde(rename = "C_alpha")]
    pub c_alpha: f64,
    pub constants: Constants,
    pub mode: Mode,
}

/// `⌊d/(2P)⌋`.
pub fn d_tilde(d: usize, depth: usize) -> usize {
    d / (2 * depth)
}

/// `(C₂/α)^{ln 2/α}`.
pub fn c_alpha(c2: f64, alpha: f64) -> f64 {
    (c2 / alpha).powf(std::f64::consts::LN_2 / alpha)
}

/// `⌈max(16 ln(32 d² P), C_α ln k)⌉`.
pub fn det_l_formula(d: usize, depth: usize, k: usize, c_alpha: f64) -> usize {
    let d = d as f64;
    let a = 16.0 * (32.0 * d * d * depth as f64).ln();
    let b = c_alpha * (k as f64).ln();
    a.max(b).ceil() as usize
}

/// `⌈C k³ ln d⌉`.
pub fn rand_l_formula(d: usize, k: usize, c: f64) -> usize {
    (c * (k as f64).powi(3) * (d as f64).ln()).ceil() as usize
}

/// Build the η ladder: η_P = η_top, η_p = η_P/(μ_P μ^{P−p−1}) for p < P.
fn eta_ladder(depth: usize, eta_top: f64, mu: f64, mu_last: f64) -> Vec<f64> {
    (1..=depth)
        .map(|p| {
            if p == depth {
                eta_top
            } else {
                eta_top / (mu_last * mu.powi((depth - p - 1) as i32))
            }
        })
        .collect()
}

/// Compute the deterministic parameters; in strict mode, violations are errors.
pub fn deterministic_params(
    d: usize,
    depth: usize,
    k: usize,
    alpha: f64,
    l_last: Option<usize>,
    constants: Constants,
    mode: Mode,
) -> Result<DetParams, ParamsError> {
    let params = compute_det(d, depth, k, alpha, l_last, constants, mode)?;
    let errors: Vec<_> = params
        .validate()
        .into_iter()
        .filter(|v| v.severity == Severity::Error)
        .collect();
    if !errors.is_empty() {
        return Err(ParamsError::AssumptionViolation(errors));
    }
    Ok(params)
}

/// The formulas alone. Hard infeasibility is still an error; assumption
/// checks are left to [`DetParams::validate`].
pub fn compute_det(
    d: usize,
    depth: usize,
    k: usize,
    alpha: f64,
    l_last: Option<usize>,
    constants: Constants,
    mode: Mode,
) -> Result<DetParams, ParamsError> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(ParamsError::Invalid(format!("alpha = {alpha} not in (0, 1]")));
    }
    if depth > 0 && d / (2 * depth) == 0 {
        return Err(ParamsError::Infeasible(format!("d̃ = ⌊{d}/(2·{depth})⌋ = 0")));
    }
    common_checks(d, depth, k, mode, &constants)?;
    let dt = d_tilde(d, depth);
    let ca = c_alpha(constants.c2, alpha);
    let l = constants
        .l_override
        .unwrap_or_else(|| det_l_formula(d, depth, k, ca));
    let l_last = l_last.unwrap_or(l);
    if l == 0 || l_last == 0 {
        return Err(ParamsError::Invalid("l and l_P must be positive".into()));
    }
    let f = constants.mu_factor.unwrap_or(600.0);
    let (df, kf) = (d as f64, k as f64);
    let mu_last = f * (df * kf.powf(1.0 + alpha) / l_last as f64).sqrt();
    let mu = f * (df * kf.powf(1.0 + alpha) / l as f64).sqrt();
    let eta_top = 0.1 * (dt as f64 / df).sqrt();
    let mut eta = eta_ladder(depth, eta_top, mu, mu_last);
    let mut delta: Vec<f64> = (1..=depth)
        .map(|p| {
            let lp = if p == depth { l_last } else { l } as f64;
            eta[p - 1] / 36.0 * (lp / (dt as f64 * kf.powf(alpha))).sqrt()
        })
        .collect();
    let mut epsilon = delta[0] / 2.0;
    if let Some(target) = constants.eps_target {
        let s = target / epsilon;
        eta.iter_mut().for_each(|v| *v *= s);
        delta.iter_mut().for_each(|v| *v *= s);
        epsilon = target;
    }
    check_finite("mu", &[mu, mu_last])?;
    check_finite("eta", &eta)?;
    check_finite("delta", &delta)?;
    check_finite("epsilon", &[epsilon])?;
    Ok(DetParams {
        d,
        depth,
        k,
        alpha,
        l_last,
        d_tilde: dt,
        l,
        eta,
        mu,
        mu_last,
        delta,
        epsilon,
        c_alpha: ca,
        constants,
        mode,
    })
}

impl DetParams {
    /// Probe dimension at depth `p` (1-based).
    pub fn l_at(&self, p: usize) -> usize {
        if p == self.depth {
            self.l_last
        } else {
            self.l
        }
    }

    pub fn validate(&self) -> Vec<Violation> {
        self.validate_with(None)
    }

    pub fn validate_with(&self, hyp: Option<Hypothesis>) -> Vec<Violation> {
        let mut out = Vec::new();
        let m = self.mode;
        let (d, big_p, k) = (self.d, self.depth, self.k);
        push(&mut out, m, big_p >= 2, "P ≥ 2", "nested construction", format!("P = {big_p}"));
        push(&mut out, m, d >= 40 * big_p, "d ≥ 40P", "inscribed ball", format!("d = {d}, 40P = {}", 40 * big_p));
        let lq = self.l.max(self.l_last);
        push(&mut out, m, lq <= self.d_tilde, "l_q ≤ d̃", "sampling probes inside E_p", format!("l_q = {lq}, d̃ = {}", self.d_tilde));
        push(
            &mut out,
            m,
            4 * lq * k <= self.d_tilde,
            "4 l_q k ≤ d̃",
            "probing subspaces across periods fit inside E_p",
            format!("4·{lq}·{k} = {} > d̃ = {}", 4 * lq * k, self.d_tilde),
        );
        push(&mut out, m, self.l_last >= self.l, "l_P ≥ l", "depth-P probing", format!("l_P = {}, l = {}", self.l_last, self.l));
        let lmin = 16.0 * (32.0 * (d as f64).powi(2) * big_p as f64).ln();
        push(&mut out, m, self.l as f64 >= lmin, "l ≥ 16 ln(32d²P)", "period properness", format!("l = {}, bound = {lmin:.3}", self.l));
        let lalpha = self.c_alpha * (k as f64).ln();
        push(&mut out, m, self.l as f64 >= lalpha, "l ≥ C_α ln k", "probing game", format!("l = {}, bound = {lalpha:.3}", self.l));
        let increasing = self.delta.windows(2).all(|w| w[0] < w[1]);
        push(&mut out, m, increasing, "δ_1 < δ_2 < … < δ_P", "depth ordering", format!("δ = {:?}", self.delta));
        if let Some(h) = hyp {
            let (df, pf) = (d as f64, big_p as f64);
            let lhs = h.c * (h.memory_bits + df * pf * df.ln()) / df * pf.powi(3) * df.ln();
            push(
                &mut out,
                m,
                lhs <= k as f64,
                "c₂ (M + dP ln d)/d · P³ ln d ≤ k",
                "final lower bound",
                format!("lhs = {lhs:.3}, k = {k}"),
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("params serialize")
    }

    /// Parse a parameter document and check its derived fields against a
    /// fresh recomputation.
    pub fn from_json(s: &str) -> Result<Self, ParamsError> {
        let doc: DetParams =
            serde_json::from_str(s).map_err(|e| ParamsError::Invalid(e.to_string()))?;
        let fresh = compute_det(
            doc.d,
            doc.depth,
            doc.k,
            doc.alpha,
            Some(doc.l_last),
            doc.constants.clone(),
            doc.mode,
        )?;
        if fresh != doc {
            return Err(ParamsError::Invalid(
                "derived fields disagree with recomputation".into(),
            ));
        }
        Ok(doc)
    }
}

/// Randomized construction parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandParams {
    pub d: usize,
    #[serde(rename = "P")]
    pub depth: usize,
    pub k: usize,
    #[serde(rename = "l_P")]
    pub l_last: usize,
    pub d_tilde: usize,
    pub l: usize,
    pub eta: Vec<f64>,
    pub mu: f64,
    #[serde(rename = "mu_P")]
    pub mu_last: f64,
    /// `delta[p-1][i-1]` is δ_i^{(p)}.
    pub delta: Vec<Vec<f64>>,
    /// γ_1 … γ_P.
    pub gamma: Vec<f64>,
    pub epsilon: f64,
    /// T_1 … T_P.
    pub period: Vec<u64>,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "N_P")]
    pub n_last: usize,
    #[serde(rename = "J_P")]
    pub j_last: usize,
    pub constants: Constants,
    pub mode: Mode,
}

pub fn randomized_params(
    d: usize,
    depth: usize,
    k: usize,
    l_last: Option<usize>,
    constants: Constants,
    mode: Mode,
) -> Result<RandParams, ParamsError> {
    let params = compute_rand(d, depth, k, l_last, constants, mode)?;
    let errors: Vec<_> = params
        .validate()
        .into_iter()
        .filter(|v| v.severity == Severity::Error)
        .collect();
    if !errors.is_empty() {
        return Err(ParamsError::AssumptionViolation(errors));
    }
    Ok(params)
}

pub fn compute_rand(
    d: usize,
    depth: usize,
    k: usize,
    l_last: Option<usize>,
    constants: Constants,
    mode: Mode,
) -> Result<RandParams, ParamsError> {
    common_checks(d, depth, k, mode, &constants)?;
    if k < 3 {
        return Err(ParamsError::Invalid(format!("k = {k} < 3")));
    }
    let dt = d_tilde(d, depth);
    if dt == 0 {
        return Err(ParamsError::Infeasible(format!("d̃ = ⌊{d}/(2·{depth})⌋ = 0")));
    }
    let l = constants
        .l_override
        .unwrap_or_else(|| rand_l_formula(d, k, constants.c_rand));
    let l_last = l_last.unwrap_or(l);
    if l == 0 || l_last == 0 {
        return Err(ParamsError::Invalid("l and l_P must be positive".into()));
    }
    let f = constants.mu_factor.unwrap_or(1200.0);
    let (df, kf) = (d as f64, k as f64);
    let mu_last = f * kf * (kf * df / l_last as f64).sqrt();
    let mu = f * kf * (kf * df / l as f64).sqrt();
    let eta_top = 0.1 * (dt as f64 / df).sqrt();
    let mut eta = eta_ladder(depth, eta_top, mu, mu_last);
    let ratio = 1.0 - 2.0 / kf;
    let mut delta: Vec<Vec<f64>> = (1..=depth)
        .map(|p| {
            let lp = if p == depth { l_last } else { l } as f64;
            (1..=k)
                .map(|i| eta[p - 1] * ratio.powi((k - i) as i32) / 2.0 * (lp / dt as f64).sqrt())
                .collect()
        })
        .collect();
    let mut epsilon = delta[0][0] / 2.0;
    if let Some(target) = constants.eps_target {
        let s = target / epsilon;
        eta.iter_mut().for_each(|v| *v *= s);
        delta.iter_mut().flatten().for_each(|v| *v *= s);
        epsilon = target;
    }
    let gamma: Vec<f64> = delta.iter().map(|row| row[0] / (4.0 * kf)).collect();
    let n = constants.n_override.unwrap_or(dt / (2 * l * k));
    let n_last = constants.n_override.unwrap_or(dt / (2 * l_last * k));
    if n == 0 && depth >= 2 {
        return Err(ParamsError::Infeasible(format!(
            "N = ⌊d̃/(2lk)⌋ = 0 makes every period beyond depth 1 empty (d̃ = {dt}, l = {l}, k = {k})"
        )));
    }
    let mut period = Vec::with_capacity(depth);
    let base = (k / 2) as u64;
    for p in 1..=depth {
        let t = (n as u64)
            .checked_pow((p - 1) as u32)
            .and_then(|v| v.checked_mul(base))
            .ok_or_else(|| ParamsError::Underflow(format!("T_{p} overflows")))?;
        period.push(t);
    }
    check_finite("mu", &[mu, mu_last])?;
    check_finite("eta", &eta)?;
    check_finite("delta", &delta.concat())?;
    check_finite("gamma", &gamma)?;
    check_finite("epsilon", &[epsilon])?;
    Ok(RandParams {
        d,
        depth,
        k,
        l_last,
        d_tilde: dt,
        l,
        eta,
        mu,
        mu_last,
        delta,
        gamma,
        epsilon,
        period,
        n,
        n_last,
        j_last: n,
        constants,
        mode,
    })
}

impl RandParams {
    pub fn l_at(&self, p: usize) -> usize {
        if p == self.depth {
            self.l_last
        } else {
            self.l
        }
    }

    /// T_p for 1-based `p`.
    pub fn period_len(&self, p: usize) -> u64 {
        self.period[p - 1]
    }

    /// Number of depth-`p` periods inside one depth-P period.
    pub fn periods_per_top(&self, p: usize) -> u64 {
        (self.n as u64).pow((self.depth - p) as u32)
    }

    pub fn validate(&self) -> Vec<Violation> {
        self.validate_with(None)
    }

    pub fn validate_with(&self, hyp: Option<Hypothesis>) -> Vec<Violation> {
        let mut out = Vec::new();
        let m = self.mode;
        let (d, big_p, k) = (self.d, self.depth, self.k);
        push(&mut out, m, big_p >= 2, "P ≥ 2", "nested construction", format!("P = {big_p}"));
        push(&mut out, m, d >= 40 * big_p, "d ≥ 40P", "inscribed ball", format!("d = {d}, 40P = {}", 40 * big_p));
        let lq = self.l.max(self.l_last);
        push(&mut out, m, lq <= self.d_tilde, "l_q ≤ d̃", "sampling probes inside E_p", format!("l_q = {lq}, d̃ = {}", self.d_tilde));
        push(
            &mut out,
            m,
            4 * lq * k <= self.d_tilde,
            "4 l_q k ≤ d̃",
            "probing subspaces across periods fit inside E_p",
            format!("4·{lq}·{k} = {} > d̃ = {}", 4 * lq * k, self.d_tilde),
        );
        push(&mut out, m, self.l_last >= self.l, "l_P ≥ l", "depth-P probing", format!("l_P = {}, l = {}", self.l_last, self.l));
        let lmin = self.constants.c_rand * (k as f64).powi(3) * (d as f64).ln();
        push(&mut out, m, self.l as f64 >= lmin, "l ≥ C k³ ln d", "oblivious probing", format!("l = {}, bound = {lmin:.3}", self.l));
        let increasing = self.delta.iter().all(|row| row.windows(2).all(|w| w[0] < w[1]));
        push(&mut out, m, increasing, "δ_1^{(p)} < … < δ_k^{(p)}", "index ordering", format!("k = {k}"));
        if let Some(h) = hyp {
            let (df, pf) = (d as f64, big_p as f64);
            let lhs = h.c * (h.memory_bits + df * pf * df.ln()) / df * pf.powi(3) * df.ln();
            push(
                &mut out,
                m,
                lhs <= k as f64,
                "c (M + dP ln d)/d · P³ ln d ≤ k",
                "final lower bound",
                format!("lhs = {lhs:.3}, k = {k}"),
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("params serialize")
    }

    pub fn from_json(s: &str) -> Result<Self, ParamsError> {
        let doc: RandParams =
            serde_json::from_str(s).map_err(|e| ParamsError::Invalid(e.to_string()))?;
        let fresh = compute_rand(
            doc.d,
            doc.depth,
            doc.k,
            Some(doc.l_last),
            doc.constants.clone(),
            doc.mode,
        )?;
        if fresh != doc {
            return Err(ParamsError::Invalid(
                "derived fields disagree with recomputation".into(),
            ));
        }
        Ok(doc)
    }
}

/// Lab constants with the given overrides.
pub fn lab(l: Option<usize>, mu_factor: Option<f64>, eps: Option<f64>) -> Constants {
    Constants {
        l_override: l,
        mu_factor,
        eps_target: eps,
        ..Constants::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn large_strict_instance() {
        let p = deterministic_params(1_000_000, 2, 100, 1.0, None, Constants::default(), Mode::Strict).unwrap();
        assert_eq!(p.d_tilde, 250_000);
        assert_eq!(p.l, 509);
        assert_eq!(p.l_last, 509);
        assert!(4 * p.l * p.k <= p.d_tilde);
        assert!((p.eta[1] - 0.05).abs() < 1e-15);
        assert!(p.validate().is_empty());
        assert_eq!(p.epsilon, p.delta[0] / 2.0);
    }

    #[test]
    fn c_alpha_value() {
        assert!((c_alpha(8.0, 1.0) - 8f64.powf(std::f64::consts::LN_2)).abs() < 1e-12);
        assert!((c_alpha(8.0, 1.0) - 4.23).abs() < 0.005);
    }

    #[test]
    fn small_strict_rejected() {
        let p = compute_det(100, 2, 5, 1.0, None, Constants::default(), Mode::Strict).unwrap();
        assert_eq!(p.l, 214);
        assert_eq!(p.d_tilde, 25);
        let v = p.validate();
        assert!(v.iter().any(|x| x.inequality == "4 l_q k ≤ d̃" && x.severity == Severity::Error));
        match deterministic_params(100, 2, 5, 1.0, None, Constants::default(), Mode::Strict) {
            Err(ParamsError::AssumptionViolation(list)) => {
                assert!(list.iter().any(|x| x.inequality == "4 l_q k ≤ d̃"))
            }
            other => panic!("expected violation, got {other:?}"),
        }
    }

    #[test]
    fn lab_downgrades() {
        let p = deterministic_params(100, 2, 5, 1.0, None, lab(Some(2), None, None), Mode::Lab).unwrap();
        let v = p.validate();
        let hit = v.iter().find(|x| x.inequality == "4 l_q k ≤ d̃").unwrap();
        assert_eq!(hit.severity, Severity::Warning);
    }

    #[test]
    fn strict_overrides_rejected() {
        assert!(deterministic_params(1_000_000, 2, 100, 1.0, None, lab(Some(2), None, None), Mode::Strict).is_err());
    }

    #[test]
    fn rand_l() {
        assert_eq!(rand_l_formula(10_000, 3, 1.0), 249);
        let p = compute_rand(1_000_000, 2, 3, None, Constants::default(), Mode::Lab).unwrap();
        for row in &p.delta {
            for w in row.windows(2) {
                assert!((w[1] / w[0] - 3.0).abs() < 1e-12);
            }
        }
        assert_eq!(p.period[0], 1);
        assert_eq!(p.gamma[0], p.delta[0][0] / 12.0);
    }

    #[test]
    fn json_roundtrip() {
        let p = deterministic_params(1_000_000, 2, 100, 1.0, None, Constants::default(), Mode::Strict).unwrap();
        assert_eq!(DetParams::from_json(&p.to_json()).unwrap(), p);
        let mut tampered: serde_json::Value = serde_json::from_str(&p.to_json()).unwrap();
        tampered["l"] = 3.into();
        assert!(DetParams::from_json(&tampered.to_string()).is_err());
        let r = compute_rand(10_000, 2, 3, None, Constants::default(), Mode::Lab).unwrap();
        assert_eq!(RandParams::from_json(&r.to_json()).unwrap(), r);
    }

    #[test]
    fn underflow_reported() {
        let c = lab(Some(1), Some(1e200), None);
        let e = compute_det(4000, 40, 2, 1.0, None, c, Mode::Lab).unwrap_err();
        assert!(matches!(e, ParamsError::Underflow(_)));
    }

    proptest! {
        #[test]
        fn det_pure_and_monotone(d in 200usize..5000, depth in 2usize..5, k in 1usize..6,
                                 l in 1usize..4, alpha in 0.1f64..=1.0) {
            let c = lab(Some(l), None, None);
            if let Ok(p) = compute_det(d, depth, k, alpha, None, c.clone(), Mode::Lab) {
                let q = compute_det(d, depth, k, alpha, None, c, Mode::Lab).unwrap();
                prop_assert_eq!(&p, &q);
                prop_assert!(p.delta.windows(2).all(|w| w[0] < w[1]));
                prop_assert_eq!(p.epsilon, p.delta[0] / 2.0);
                for pp in 1..depth {
                    let expect = p.eta[depth - 1] / (p.mu_last * p.mu.powi((depth - pp - 1) as i32));
                    prop_assert!((p.eta[pp - 1] - expect).abs() <= 1e-12 * expect);
                }
            }
        }

        #[test]
        fn rand_monotone(d in 200usize..5000, k in 3usize..7, l in 1usize..4) {
            let c = lab(Some(l), None, None);
            if let Ok(p) = compute_rand(d, 2, k, None, c, Mode::Lab) {
                for row in &p.delta {
                    prop_assert!(row.windows(2).all(|w| w[0] < w[1]));
                }
                prop_assert_eq!(p.period[0] as usize, k / 2);
                prop_assert_eq!(p.period[1] as usize, (k / 2) * p.n);
            }
        }
    }
}
