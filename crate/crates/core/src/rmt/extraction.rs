//! Orthonormal extraction from robustly independent unit vectors.
//!
//! For unit `y_1 … y_r` with residuals at least `δ` and `s ≥ 2`, the top
//! `⌈r/s⌉` left singular vectors `Z` of `Y` satisfy
//! `‖Zᵀa‖∞ ≤ (√r/δ)^{s/(s−1)} ‖Yᵀa‖∞` for every `a`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Result, RmtError};
use crate::rng::stream;
use crate::subspace::{
    extraction_bound, extraction_count, gaussian_vector, random_unit_vector, robust_independence_margin,
    top_singular_vectors,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractionCheck {
    pub r: usize,
    pub s: usize,
    pub delta: f64,
    pub bound: f64,
    pub directions: usize,
    pub violations: usize,
    /// Largest `‖Zᵀa‖∞ / (bound·‖Yᵀa‖∞)`.
    pub max_ratio: f64,
    pub orth_error: f64,
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.amax()
}

/// Check the inequality for `ys` along each direction in `dirs`.
pub fn check_extraction(ys: &[DVector<f64>], delta: f64, s: usize, dirs: &[DVector<f64>]) -> Result<ExtractionCheck> {
    if s < 2 {
        return Err(RmtError::Invalid(format!("s = {s}, need s ≥ 2")));
    }
    if !(delta > 0.0) {
        return Err(RmtError::Invalid(format!("δ = {delta}")));
    }
    let r = ys.len();
    let margin = robust_independence_margin(ys);
    if margin < delta * (1.0 - 1e-12) {
        return Err(RmtError::Invalid(format!("vectors have margin {margin} < δ = {delta}")));
    }
    let count = extraction_count(r, s);
    let zs = top_singular_vectors(ys, count)?;
    let z = DMatrix::from_columns(&zs);
    let y = DMatrix::from_columns(ys);
    let orth_error = (z.transpose() * &z - DMatrix::<f64>::identity(count, count)).amax();
    let bound = extraction_bound(r, s, delta);
    let mut violations = 0;
    let mut max_ratio: f64 = 0.0;
    for a in dirs {
        let lhs = inf_norm(&(z.transpose() * a));
        let rhs = bound * inf_norm(&(y.transpose() * a));
        let slack = 1e-12 * a.norm();
        if lhs > rhs * (1.0 + 1e-10) + slack {
            violations += 1;
        }
        if rhs > 0.0 {
            max_ratio = max_ratio.max(lhs / rhs);
        }
    }
    Ok(ExtractionCheck {
        r,
        s,
        delta,
        bound,
        directions: dirs.len(),
        violations,
        max_ratio,
        orth_error,
    })
}

/// Unit vectors with a tunable margin: `y_i` mixes a fresh direction with
/// weight `θ` into a random combination of the earlier ones.
pub fn random_instance(d: usize, r: usize, theta: f64, rng: &mut dyn RngCore) -> Vec<DVector<f64>> {
    let mut ys: Vec<DVector<f64>> = Vec::with_capacity(r);
    for _ in 0..r {
        let fresh = random_unit_vector(d, rng);
        let y = if ys.is_empty() {
            fresh
        } else {
            let mut old = DVector::zeros(d);
            for p in &ys {
                old += p * rng.sample::<f64, _>(rand_distr::StandardNormal);
            }
            let on = old.norm();
            let v = if on > 0.0 { fresh * theta + old * ((1.0 - theta) / on) } else { fresh };
            let vn = v.norm();
            v / vn
        };
        ys.push(y);
    }
    ys
}

/// Directions: Gaussian ones, the extracted vectors themselves, and
/// directions nearly orthogonal to all of `Y`.
fn directions(ys: &[DVector<f64>], count: usize, rng: &mut dyn RngCore) -> Vec<DVector<f64>> {
    let d = ys[0].len();
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        match i % 3 {
            0 => out.push(gaussian_vector(d, rng)),
            1 => {
                let mut a = DVector::zeros(d);
                for y in ys {
                    a += y * rng.sample::<f64, _>(rand_distr::StandardNormal);
                }
                out.push(a);
            }
            _ => {
                let g = gaussian_vector(d, rng);
                let y = DMatrix::from_columns(ys);
                let coef = y.clone().pseudo_inverse(1e-12).map(|p| p * &g).unwrap_or_else(|_| DVector::zeros(ys.len()));
                let perp = &g - &y * coef;
                out.push(perp * 0.999 + g * 1e-3);
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractionReport {
    pub instances: usize,
    pub directions: usize,
    pub violations: usize,
    pub max_ratio: f64,
    pub max_orth_error: f64,
    pub min_delta: f64,
}

/// `instances` random `(Y, δ, s)` draws, each checked along `dirs` directions.
pub fn extraction_suite(instances: usize, dirs: usize, seed: u64) -> Result<ExtractionReport> {
    let checks = (0..instances)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream(seed, "rmt/extraction", &[t as u64]);
            let r = rng.random_range(1..=12usize);
            let d = rng.random_range(r.max(2)..=3 * r + 4);
            let theta = 10f64.powf(rng.random_range(-2.0..0.0));
            let ys = random_instance(d, r, theta, &mut rng);
            let delta = robust_independence_margin(&ys).min(1.0);
            let s = rng.random_range(2..=r.max(2) + 2);
            let dv = directions(&ys, dirs, &mut rng);
            check_extraction(&ys, delta, s, &dv)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExtractionReport {
        instances,
        directions: dirs,
        violations: checks.iter().map(|c| c.violations).sum(),
        max_ratio: checks.iter().map(|c| c.max_ratio).fold(0.0, f64::max),
        max_orth_error: checks.iter().map(|c| c.orth_error).fold(0.0, f64::max),
        min_delta: checks.iter().map(|c| c.delta).fold(f64::INFINITY, f64::min),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn orthonormal_input_is_tight_enough() {
        let ys: Vec<DVector<f64>> = (0..4).map(|i| DVector::from_fn(6, |j, _| f64::from(u8::from(i == j)))).collect();
        let dirs: Vec<DVector<f64>> = (0..10).map(|t| gaussian_vector(6, &mut stream(t, "t", &[]))).collect();
        let c = check_extraction(&ys, 1.0, 2, &dirs).unwrap();
        assert_eq!(c.violations, 0);
        assert!(c.orth_error < 1e-12);
        assert!((c.bound - 4.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let ys = random_instance(8, 3, 0.1, &mut stream(0, "t", &[]));
        assert!(check_extraction(&ys, 0.5, 1, &[]).is_err());
        assert!(check_extraction(&ys, 0.99, 2, &[]).is_err());
    }

    #[test]
    fn small_suite_is_clean() {
        let r = extraction_suite(50, 30, 1).unwrap();
        assert_eq!(r.violations, 0);
        assert!(r.max_orth_error < 1e-8);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn inequality_holds(seed in 0u64..10_000, r in 1usize..9, extra in 0usize..10, s in 2usize..6, lt in -2.0f64..0.0) {
            let mut rng = stream(seed, "p", &[]);
            let ys = random_instance(r + extra + 1, r, 10f64.powf(lt), &mut rng);
            let delta = robust_independence_margin(&ys).min(1.0);
            let dirs = directions(&ys, 12, &mut rng);
            let c = check_extraction(&ys, delta, s, &dirs).unwrap();
            prop_assert_eq!(c.violations, 0);
            prop_assert!(c.orth_error < 1e-8);
        }
    }
}
