//! Upper-triangular rectangular Gaussian ensembles.
//!
//! An `n × Cn` matrix whose entry `(i, j)` (1-based) is an iid standard
//! Gaussian when `j > (i−1)C`. The lower part of row `i`, the `C(i−1)` entries
//! left of the band, is either zero or written by a [`LowerTriangle`]
//! generator that only sees rows `< i` and columns `≤ C(i−1)`.

use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Result, RmtError, TailVerdict};
use crate::rng::stream;
use crate::subspace::{gaussian_matrix, gaussian_vector};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TriangularSpec {
    pub n: usize,
    #[serde(rename = "C")]
    pub c: usize,
    pub alpha: f64,
    pub adaptive: bool,
}

impl TriangularSpec {
    pub fn new(n: usize, c: usize, alpha: f64) -> Result<Self> {
        let s = Self { n, c, alpha, adaptive: false };
        s.validate()?;
        Ok(s)
    }

    pub fn adaptive(mut self) -> Self {
        self.adaptive = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.c < 2 {
            return Err(RmtError::Invalid(format!("need n ≥ 1 and C ≥ 2, got n = {}, C = {}", self.n, self.c)));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(RmtError::Invalid(format!("α = {} outside (0, 1]", self.alpha)));
        }
        Ok(())
    }

    /// Number of columns, `Cn`.
    pub fn m(&self) -> usize {
        self.c * self.n
    }

    /// `(1/6)√(C/n^α)`.
    pub fn threshold(&self) -> f64 {
        (self.c as f64 / (self.n as f64).powf(self.alpha)).sqrt() / 6.0
    }

    /// `3e^{−C/16}`.
    pub fn tail_bound(&self) -> f64 {
        3.0 * (-(self.c as f64) / 16.0).exp()
    }

    /// Whether `(i, j)`, 0-based, lies in the Gaussian band.
    pub fn is_upper(&self, i: usize, j: usize) -> bool {
        j >= i * self.c
    }
}

/// Read-only access to rows `< i` and columns `< C·i` (0-based `i`) of the
/// matrix being built.
pub struct PermittedView<'a> {
    m: &'a DMatrix<f64>,
    row: usize,
    cols: usize,
}

impl PermittedView<'_> {
    /// The 0-based row being filled.
    pub fn row(&self) -> usize {
        self.row
    }

    /// `(rows, cols)` of the readable block.
    pub fn shape(&self) -> (usize, usize) {
        (self.row, self.cols)
    }

    pub fn get(&self, u: usize, v: usize) -> Result<f64> {
        if u >= self.row || v >= self.cols {
            return Err(RmtError::StructuralViolation { at_row: self.row, row: u, col: v });
        }
        Ok(self.m[(u, v)])
    }

    /// The whole readable block.
    pub fn block(&self) -> DMatrix<f64> {
        self.m.view((0, 0), (self.row, self.cols)).into_owned()
    }
}

/// Writes the lower part of each row from the permitted view.
pub trait LowerTriangle {
    /// `out` has length `C·i` for 0-based row `i`.
    fn fill(&mut self, view: &PermittedView<'_>, out: &mut [f64]) -> Result<()>;
}

impl<F> LowerTriangle for F
where
    F: FnMut(&PermittedView<'_>, &mut [f64]) -> Result<()>,
{
    fn fill(&mut self, view: &PermittedView<'_>, out: &mut [f64]) -> Result<()> {
        self(view, out)
    }
}

/// Every lower entry set to one constant.
#[derive(Clone, Copy, Debug)]
pub struct ConstantLower(pub f64);

impl LowerTriangle for ConstantLower {
    fn fill(&mut self, _: &PermittedView<'_>, out: &mut [f64]) -> Result<()> {
        out.fill(self.0);
        Ok(())
    }
}

/// Copies the visible part of the previous row, pushing rows towards
/// collinearity.
#[derive(Clone, Copy, Debug)]
pub struct CopyPreviousLower;

impl LowerTriangle for CopyPreviousLower {
    fn fill(&mut self, view: &PermittedView<'_>, out: &mut [f64]) -> Result<()> {
        let u = view.row() - 1;
        for (v, o) in out.iter_mut().enumerate() {
            *o = view.get(u, v)?;
        }
        Ok(())
    }
}

pub enum Lower<'a> {
    Zero,
    Adaptive(&'a mut dyn LowerTriangle),
}

/// Draw one matrix. The Gaussian band is drawn as a full `n × Cn` Gaussian
/// matrix with the lower part discarded, so the band is identical for every
/// choice of `lower` under the same stream.
pub fn sample_triangular(spec: &TriangularSpec, lower: Lower<'_>, rng: &mut dyn RngCore) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let (n, c) = (spec.n, spec.c);
    let mut m = gaussian_matrix(n, spec.m(), rng);
    for i in 0..n {
        for j in 0..c * i {
            m[(i, j)] = 0.0;
        }
    }
    if let Lower::Adaptive(gen) = lower {
        let mut buf = Vec::new();
        for i in 1..n {
            buf.clear();
            buf.resize(c * i, 0.0);
            gen.fill(&PermittedView { m: &m, row: i, cols: c * i }, &mut buf)?;
            if buf.iter().any(|v| !v.is_finite()) {
                return Err(RmtError::Invalid(format!("generator wrote a non-finite entry in row {i}")));
            }
            for (j, v) in buf.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
    }
    Ok(m)
}

/// Copy of `m` with every entry left of the band set to zero.
pub fn zero_lower(m: &DMatrix<f64>, c: usize) -> DMatrix<f64> {
    let mut z = m.clone();
    for i in 0..m.nrows() {
        for j in 0..(c * i).min(m.ncols()) {
            z[(i, j)] = 0.0;
        }
    }
    z
}

/// Largest absolute entry left of the band.
pub fn lower_magnitude(m: &DMatrix<f64>, c: usize) -> f64 {
    let mut out: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..(c * i).min(m.ncols()) {
            out = out.max(m[(i, j)].abs());
        }
    }
    out
}

/// The `n`-th singular value of an `n × m` matrix: the QR factor of `Mᵀ` has
/// the same singular values and is only `n × n`. Zero when `n > m`.
pub fn smallest_singular_value(m: &DMatrix<f64>) -> f64 {
    let (n, cols) = m.shape();
    if n == 0 {
        return 0.0;
    }
    if n > cols {
        return 0.0;
    }
    let r = m.transpose().qr().r();
    r.singular_values().iter().copied().fold(f64::INFINITY, f64::min).max(0.0)
}

fn sorted_left_vectors(m: DMatrix<f64>) -> DMatrix<f64> {
    let svd = m.svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let s = svd.singular_values;
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    DMatrix::from_columns(&order.iter().map(|&i| u.column(i).into_owned()).collect::<Vec<_>>())
}

/// A zero-lower-triangle matrix `M⁰` with an orthogonal `W` such that
/// `‖Mᵀx‖ ≥ ‖M⁰ᵀ W x‖` for every `x`.
#[derive(Clone, Debug)]
pub struct Coupled {
    pub m0: DMatrix<f64>,
    pub w: DMatrix<f64>,
}

/// Build the coupling row by row.
///
/// With `N` the first `i` rows of `M` restricted to the first `C(i−1)`
/// columns and `Ñ` the same block with its last row zeroed, `NᵀN ⪰ ÑᵀÑ`, so
/// matching the left singular vectors of the two sorted SVDs gives
/// `U` with `‖Nᵀx‖ ≥ ‖ÑᵀUx‖`. The new band block `A` is rotated by `U`, then by
/// the rotation already built for the first `i − 1` rows. Rotations only
/// depend on columns left of the new band, so each rotated block is again
/// iid Gaussian.
pub fn couple(m: &DMatrix<f64>, c: usize) -> Result<Coupled> {
    let (n, cols) = m.shape();
    if n == 0 || c < 2 || cols != c * n {
        return Err(RmtError::Invalid(format!("need an n × Cn matrix with C ≥ 2, got {n} × {cols}, C = {c}")));
    }
    let mut m0 = DMatrix::zeros(n, cols);
    m0.view_mut((0, 0), (1, c)).copy_from(&m.view((0, 0), (1, c)));
    let mut w = DMatrix::<f64>::identity(1, 1);
    for r in 2..=n {
        let pc = c * (r - 1);
        let nb = m.view((0, 0), (r, pc)).into_owned();
        let mut nt = nb.clone();
        nt.row_mut(r - 1).fill(0.0);
        let p = sorted_left_vectors(nb);
        let pt = sorted_left_vectors(nt);
        let u = &pt * p.transpose();
        let a = m.view((0, pc), (r, c)).into_owned();
        let mut wp = DMatrix::<f64>::identity(r, r);
        wp.view_mut((0, 0), (r - 1, r - 1)).copy_from(&w);
        let b = &wp * &u * a;
        m0.view_mut((0, pc), (r, c)).copy_from(&b);
        w = wp * u;
    }
    Ok(Coupled { m0, w })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    pub spec: TriangularSpec,
    pub pairs: usize,
    /// Pairs with `σ_min(M) < σ_min(M⁰)` beyond roundoff.
    pub violations: usize,
    /// Smallest `σ_min(M) − σ_min(M⁰)` observed.
    pub worst_gap: f64,
    /// Largest lower-triangle entry of any `M⁰`.
    pub lower_leak: f64,
    /// Largest `‖WᵀW − I‖_max`.
    pub rotation_error: f64,
    /// The same comparison against the matrix with its lower part simply
    /// zeroed, which is not a coupling.
    pub naive_violations: usize,
}

/// Compare `σ_min` on `pairs` coupled draws, generator `lower`.
pub fn coupling_check(spec: &TriangularSpec, lower: &mut dyn LowerTriangle, pairs: usize, seed: u64) -> Result<CouplingReport> {
    spec.validate()?;
    let mut report = CouplingReport {
        spec: spec.adaptive(),
        pairs,
        violations: 0,
        worst_gap: f64::INFINITY,
        lower_leak: 0.0,
        rotation_error: 0.0,
        naive_violations: 0,
    };
    for t in 0..pairs {
        let mut rng = stream(seed, "rmt/coupling", &[spec.n as u64, spec.c as u64, t as u64]);
        let m = sample_triangular(spec, Lower::Adaptive(&mut *lower), &mut rng)?;
        let cp = couple(&m, spec.c)?;
        let tol = 64.0 * f64::EPSILON * m.norm().max(1.0);
        let s = smallest_singular_value(&m);
        let s0 = smallest_singular_value(&cp.m0);
        let gap = s - s0;
        report.worst_gap = report.worst_gap.min(gap);
        if gap < -tol {
            report.violations += 1;
        }
        if s < smallest_singular_value(&zero_lower(&m, spec.c)) - tol {
            report.naive_violations += 1;
        }
        report.lower_leak = report.lower_leak.max(lower_magnitude(&cp.m0, spec.c));
        let n = spec.n;
        let werr = (cp.w.transpose() * &cp.w - DMatrix::<f64>::identity(n, n)).amax();
        report.rotation_error = report.rotation_error.max(werr);
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub spec: TriangularSpec,
    pub trials: usize,
    pub threshold: f64,
    pub below: usize,
    pub fraction: f64,
    pub bound: f64,
    pub verdict: TailVerdict,
    pub min_sigma: f64,
    pub median_sigma: f64,
    pub seed: u64,
    /// `σ_min` per trial, in trial order.
    pub sigmas: Vec<f64>,
}

/// Stream for trial `t` of a tail experiment.
pub fn trial_stream(spec: &TriangularSpec, seed: u64, t: usize) -> crate::rng::StreamRng {
    stream(seed, "rmt/tail", &[spec.n as u64, spec.c as u64, t as u64])
}

/// Zero-lower-triangle draws, parallel over trials.
pub fn tail_experiment(spec: &TriangularSpec, trials: usize, seed: u64) -> Result<TailReport> {
    spec.validate()?;
    if trials == 0 {
        return Err(RmtError::Invalid("trials must be at least 1".into()));
    }
    let sigmas = (0..trials)
        .into_par_iter()
        .map(|t| {
            let m = sample_triangular(spec, Lower::Zero, &mut trial_stream(spec, seed, t))?;
            Ok(smallest_singular_value(&m))
        })
        .collect::<Result<Vec<f64>>>()?;
    let threshold = spec.threshold();
    let below = sigmas.iter().filter(|&&s| s < threshold).count();
    let bound = spec.tail_bound();
    let mut sorted = sigmas.clone();
    sorted.sort_by(f64::total_cmp);
    let median_sigma = if trials % 2 == 1 {
        sorted[trials / 2]
    } else {
        0.5 * (sorted[trials / 2 - 1] + sorted[trials / 2])
    };
    Ok(TailReport {
        spec: *spec,
        trials,
        threshold,
        below,
        fraction: below as f64 / trials as f64,
        bound,
        verdict: TailVerdict::new(below, trials, bound),
        min_sigma: sorted[0],
        median_sigma,
        seed,
        sigmas,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub reports: Vec<TailReport>,
    /// Min `σ_min` is nondecreasing along the `C` grid.
    pub monotone: bool,
}

impl SweepReport {
    /// `C, min σ, median σ, fraction, bound` per line.
    pub fn table(&self) -> String {
        let mut s = String::from("C\tmin_sigma\tmedian_sigma\tfraction\tbound\n");
        for r in &self.reports {
            s.push_str(&format!(
                "{}\t{:.5}\t{:.5}\t{:.4}\t{:.4}\n",
                r.spec.c, r.min_sigma, r.median_sigma, r.fraction, r.bound
            ));
        }
        s
    }
}

pub fn sweep(n: usize, cs: &[usize], alpha: f64, trials: usize, seed: u64) -> Result<SweepReport> {
    let reports = cs
        .iter()
        .map(|&c| tail_experiment(&TriangularSpec::new(n, c, alpha)?, trials, seed))
        .collect::<Result<Vec<_>>>()?;
    let monotone = reports.windows(2).all(|w| w[1].min_sigma >= w[0].min_sigma);
    Ok(SweepReport { reports, monotone })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RmtCsvRow {
    pub n: usize,
    #[serde(rename = "C")]
    pub c: usize,
    pub alpha: f64,
    pub trial: usize,
    pub sigma_min: f64,
    pub threshold: f64,
    pub below_flag: u8,
    pub seed: u64,
}

impl TailReport {
    pub fn rows(&self) -> Vec<RmtCsvRow> {
        self.sigmas
            .iter()
            .enumerate()
            .map(|(trial, &s)| RmtCsvRow {
                n: self.spec.n,
                c: self.spec.c,
                alpha: self.spec.alpha,
                trial,
                sigma_min: s,
                threshold: self.threshold,
                below_flag: u8::from(s < self.threshold),
                seed: self.seed,
            })
            .collect()
    }
}

/// Write the per-trial rows of every report, header first.
pub fn write_rmt_csv<W: std::io::Write>(w: W, reports: &[TailReport]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in reports {
        for row in r.rows() {
            wr.serialize(row)?;
        }
    }
    wr.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Largest violation of `‖Mᵀx‖ ≥ ‖M⁰ᵀWx‖` over `count` random directions.
pub fn coupling_direction_gap(m: &DMatrix<f64>, cp: &Coupled, count: usize, rng: &mut dyn RngCore) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..count {
        let x: DVector<f64> = gaussian_vector(m.nrows(), rng);
        let lhs = (m.transpose() * &x).norm();
        let rhs = (cp.m0.transpose() * (&cp.w * &x)).norm();
        worst = worst.max(rhs - lhs);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn threshold_arithmetic() {
        let s = TriangularSpec::new(50, 64, 1.0).unwrap();
        assert!((s.threshold() - 0.188562).abs() < 1e-6);
        assert!((s.tail_bound() - 0.054947).abs() < 1e-6);
        assert!(TriangularSpec::new(5, 1, 1.0).is_err());
        assert!(TriangularSpec::new(5, 2, 0.0).is_err());
    }

    #[test]
    fn identity_padded_and_rank_deficient() {
        let mut m = DMatrix::zeros(4, 8);
        for i in 0..4 {
            m[(i, i)] = 1.0;
        }
        assert!((smallest_singular_value(&m) - 1.0).abs() < 1e-14);
        let mut g = gaussian_matrix(4, 8, &mut stream(1, "t", &[]));
        let r0 = g.row(0).into_owned();
        g.row_mut(3).copy_from(&r0);
        assert!(smallest_singular_value(&g) < 1e-10);
    }

    #[test]
    fn two_by_four_pattern() {
        let s = TriangularSpec::new(2, 2, 1.0).unwrap();
        let m = sample_triangular(&s, Lower::Zero, &mut stream(4, "t", &[])).unwrap();
        assert_eq!(m.shape(), (2, 4));
        assert_eq!((m[(1, 0)], m[(1, 1)]), (0.0, 0.0));
        for j in 0..4 {
            assert!(m[(0, j)] != 0.0);
        }
        assert!(m[(1, 2)] != 0.0 && m[(1, 3)] != 0.0);
    }

    #[test]
    fn forbidden_reads_are_rejected() {
        let s = TriangularSpec::new(4, 3, 1.0).unwrap();
        let mut peek_own_row = |v: &PermittedView<'_>, out: &mut [f64]| -> Result<()> {
            out[0] = v.get(v.row(), 0)?;
            Ok(())
        };
        let err = sample_triangular(&s, Lower::Adaptive(&mut peek_own_row), &mut stream(0, "t", &[])).unwrap_err();
        assert!(matches!(err, RmtError::StructuralViolation { at_row: 1, row: 1, col: 0 }));
        let mut peek_band = |v: &PermittedView<'_>, _: &mut [f64]| -> Result<()> {
            v.get(0, v.shape().1)?;
            Ok(())
        };
        assert!(matches!(
            sample_triangular(&s, Lower::Adaptive(&mut peek_band), &mut stream(0, "t", &[])),
            Err(RmtError::StructuralViolation { .. })
        ));
    }

    #[test]
    fn band_is_shared_across_generators() {
        let s = TriangularSpec::new(5, 2, 1.0).unwrap();
        let z = sample_triangular(&s, Lower::Zero, &mut stream(9, "t", &[])).unwrap();
        let a = sample_triangular(&s, Lower::Adaptive(&mut ConstantLower(1e6)), &mut stream(9, "t", &[])).unwrap();
        assert_eq!(zero_lower(&a, 2), z);
        assert_eq!(a[(4, 0)], 1e6);
    }

    #[test]
    fn coupling_holds_for_large_constant() {
        let s = TriangularSpec::new(8, 3, 1.0).unwrap();
        let r = coupling_check(&s, &mut ConstantLower(1e6), 30, 5).unwrap();
        assert_eq!(r.violations, 0, "{r:?}");
        assert_eq!(r.lower_leak, 0.0);
        assert!(r.rotation_error < 1e-10);
    }

    #[test]
    fn coupled_band_looks_gaussian() {
        let s = TriangularSpec::new(6, 4, 1.0).unwrap();
        let mut sum = 0.0;
        let mut count = 0usize;
        for t in 0..300 {
            let m = sample_triangular(&s, Lower::Adaptive(&mut CopyPreviousLower), &mut stream(t, "t", &[])).unwrap();
            let cp = couple(&m, 4).unwrap();
            for i in 0..6 {
                for j in 4 * i..24 {
                    sum += cp.m0[(i, j)].powi(2);
                    count += 1;
                }
            }
        }
        assert!((sum / count as f64 - 1.0).abs() < 0.05);
    }

    #[test]
    fn single_row_chi_square_mean() {
        let s = TriangularSpec::new(1, 6, 1.0).unwrap();
        let r = tail_experiment(&s, 10_000, 2).unwrap();
        let mean = r.sigmas.iter().map(|v| v * v).sum::<f64>() / 10_000.0;
        assert!((mean - 6.0).abs() < 0.03 * 6.0, "{mean}");
    }

    #[test]
    fn csv_header_and_rows() {
        let s = TriangularSpec::new(3, 2, 0.5).unwrap();
        let r = tail_experiment(&s, 4, 0).unwrap();
        let mut out = Vec::new();
        write_rmt_csv(&mut out, &[r]).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("n,C,alpha,trial,sigma_min,threshold,below_flag,seed\n"));
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn parallel_tail_is_deterministic() {
        let s = TriangularSpec::new(10, 4, 1.0).unwrap();
        assert_eq!(tail_experiment(&s, 40, 3).unwrap(), tail_experiment(&s, 40, 3).unwrap());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn zero_pattern_and_coupling(n in 1usize..8, c in 2usize..5, seed in 0u64..1000, scale in -3.0f64..6.0) {
            let s = TriangularSpec::new(n, c, 1.0).unwrap();
            let mut gen = ConstantLower(10f64.powf(scale));
            let m = sample_triangular(&s, Lower::Adaptive(&mut gen), &mut stream(seed, "p", &[])).unwrap();
            let cp = couple(&m, c).unwrap();
            prop_assert_eq!(lower_magnitude(&cp.m0, c), 0.0);
            let tol = 64.0 * f64::EPSILON * m.norm().max(1.0);
            prop_assert!(smallest_singular_value(&m) >= smallest_singular_value(&cp.m0) - tol);
            let gap = coupling_direction_gap(&m, &cp, 20, &mut stream(seed, "x", &[]));
            prop_assert!(gap <= tol * 10.0, "gap {}", gap);
        }
    }
}
