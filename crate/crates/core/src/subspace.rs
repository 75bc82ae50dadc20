//! Subspaces of R^d, projections, residuals and robust linear independence.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

/// Tolerance on `‖BᵀB − I‖_max` for a basis to count as orthonormal.
pub const ORTHONORMAL_TOL: f64 = 1e-9;

/// Tolerance on `|‖y‖ − 1|` for a vector to count as unit.
pub const UNIT_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SubspaceError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("cannot take a {k}-dimensional subspace of a {d}-dimensional space")]
    BadDimension { k: usize, d: usize },
    #[error("degenerate input: effective rank {effective_rank}, need {required}")]
    Degenerate { effective_rank: usize, required: usize },
    #[error("vector {index} is not unit norm (norm {norm})")]
    NonUnit { index: usize, norm: f64 },
    #[error("basis is not orthonormal (max deviation {0:e})")]
    NotOrthonormal(f64),
    #[error("non-finite entry in input")]
    NonFinite,
}

pub type Result<T> = std::result::Result<T, SubspaceError>;

/// A list of vectors in a common ambient space.
pub type VectorList = Vec<DVector<f64>>;

pub fn gaussian_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    // Column-major fill keeps the draw order identical to column-by-column sampling.
    DMatrix::from_iterator(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.sample::<f64, _>(StandardNormal)),
    )
}

/// Uniform point on the unit sphere of R^d.
pub fn random_unit_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DVector<f64> {
    loop {
        let g = gaussian_vector(d, rng);
        let n = g.norm();
        if n > 1e-300 {
            return g / n;
        }
    }
}

/// Orthonormal basis of the column span of `m`.
///
/// Uses column-pivoted QR; columns whose pivot falls below `tol · |R₀₀|`
/// are treated as dependent. Returns the basis and the detected rank.
pub fn orthonormalize(m: &DMatrix<f64>, tol: f64) -> (DMatrix<f64>, usize) {
    let (d, k) = m.shape();
    if k == 0 || d == 0 {
        return (DMatrix::zeros(d, 0), 0);
    }
    let qr = m.clone().col_piv_qr();
    let r = qr.r();
    let top = r[(0, 0)].abs();
    let rank = if top == 0.0 {
        0
    } else {
        (0..r.nrows().min(r.ncols()))
            .take_while(|&i| r[(i, i)].abs() > tol * top)
            .count()
    };
    let q = qr.q().columns(0, rank).into_owned();
    (q, rank)
}

/// A subspace stored by an orthonormal basis (a `d × k` matrix).
#[derive(Clone, Debug, PartialEq)]
pub struct Subspace {
    basis: DMatrix<f64>,
}

impl Subspace {
    /// Wrap a basis that is already orthonormal.
    pub fn from_orthonormal(basis: DMatrix<f64>) -> Result<Self> {
        if basis.iter().any(|v| !v.is_finite()) {
            return Err(SubspaceError::NonFinite);
        }
        let s = Self { basis };
        let err = s.orthogonality_error();
        if err > ORTHONORMAL_TOL {
            return Err(SubspaceError::NotOrthonormal(err));
        }
        Ok(s)
    }

    /// Span of the columns of `m`, which must have full column rank.
    pub fn from_spanning(m: &DMatrix<f64>) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(SubspaceError::NonFinite);
        }
        let (q, rank) = orthonormalize(m, 1e-12);
        if rank < m.ncols() {
            return Err(SubspaceError::Degenerate {
                effective_rank: rank,
                required: m.ncols(),
            });
        }
        Ok(Self { basis: q })
    }

    /// The zero subspace of R^d.
    pub fn zero(d: usize) -> Self {
        Self {
            basis: DMatrix::zeros(d, 0),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    fn check(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.ambient_dim() {
            return Err(SubspaceError::DimensionMismatch {
                expected: self.ambient_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Coordinates `Bᵀx` of the projection in the stored basis.
    pub fn coords(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check(x)?;
        Ok(self.basis.tr_mul(x))
    }

    pub fn project(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(&self.basis * self.coords(x)?)
    }

    /// `‖Proj(x)‖`, computed as `‖Bᵀx‖`.
    pub fn proj_norm(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(self.coords(x)?.norm())
    }

    /// `‖x − Proj(x)‖`.
    pub fn residual_norm(&self, x: &DVector<f64>) -> Result<f64> {
        Ok((x - self.project(x)?).norm())
    }

    /// The `d × d` orthogonal projector `BBᵀ`.
    pub fn projector(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }

    /// `‖BᵀB − I‖_max`.
    pub fn orthogonality_error(&self) -> f64 {
        let g = self.basis.tr_mul(&self.basis);
        let k = g.nrows();
        let mut err: f64 = 0.0;
        for i in 0..k {
            for j in 0..k {
                let target = if i == j { 1.0 } else { 0.0 };
                err = err.max((g[(i, j)] - target).abs());
            }
        }
        err
    }

    /// Largest residual of a basis vector of `other` against `self`.
    /// Zero (up to rounding) iff `other ⊆ self`.
    pub fn containment_residual(&self, other: &Subspace) -> Result<f64> {
        if other.ambient_dim() != self.ambient_dim() {
            return Err(SubspaceError::DimensionMismatch {
                expected: self.ambient_dim(),
                got: other.ambient_dim(),
            });
        }
        let mut worst: f64 = 0.0;
        for c in other.basis.column_iter() {
            worst = worst.max(self.residual_norm(&c.into_owned())?);
        }
        Ok(worst)
    }

    /// Bytes of the basis entries, for fingerprinting.
    pub fn fingerprint_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 8 * self.basis.len());
        out.extend_from_slice(&(self.ambient_dim() as u64).to_le_bytes());
        out.extend_from_slice(&(self.dim() as u64).to_le_bytes());
        for v in self.basis.iter() {
            out.extend_from_slice(&v.to_bits().to_le_bytes());
        }
        out
    }

    /// Basis columns as plain vectors.
    pub fn columns(&self) -> Vec<Vec<f64>> {
        self.basis
            .column_iter()
            .map(|c| c.iter().copied().collect())
            .collect()
    }
}

/// Haar-uniform `k`-dimensional subspace of R^d.
pub fn sample_subspace<R: Rng + ?Sized>(d: usize, k: usize, rng: &mut R) -> Result<Subspace> {
    if k > d {
        return Err(SubspaceError::BadDimension { k, d });
    }
    if k == 0 {
        return Ok(Subspace::zero(d));
    }
    loop {
        let g = gaussian_matrix(d, k, rng);
        let (q, rank) = orthonormalize(&g, 1e-10);
        if rank == k {
            return Ok(Subspace { basis: q });
        }
    }
}

/// Haar-uniform `l`-dimensional subspace of `parent`.
pub fn sample_subspace_within<R: Rng + ?Sized>(
    parent: &Subspace,
    l: usize,
    rng: &mut R,
) -> Result<Subspace> {
    let inner = sample_subspace(parent.dim(), l, rng)?;
    let basis = parent.basis() * inner.basis();
    Ok(Subspace { basis })
}

/// Incrementally grown orthonormal basis.
///
/// Residuals are computed with two passes of classical Gram-Schmidt, which is
/// accurate to working precision for the sizes used here.
#[derive(Clone, Debug, PartialEq)]
pub struct OrthoBasis {
    d: usize,
    q: Vec<DVector<f64>>,
}

impl OrthoBasis {
    pub fn new(d: usize) -> Self {
        Self { d, q: Vec::new() }
    }

    pub fn from_subspaces<'a>(d: usize, spaces: impl IntoIterator<Item = &'a Subspace>) -> Self {
        let mut b = Self::new(d);
        for s in spaces {
            b.push_subspace(s);
        }
        b
    }

    pub fn ambient_dim(&self) -> usize {
        self.d
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn clear(&mut self) {
        self.q.clear();
    }

    pub fn vectors(&self) -> &[DVector<f64>] {
        &self.q
    }

    /// `x` minus its projection onto the span.
    pub fn residual_vector(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut r = x.clone();
        for _ in 0..2 {
            for q in &self.q {
                let c = q.dot(&r);
                r.axpy(-c, q, 1.0);
            }
        }
        r
    }

    pub fn residual(&self, x: &DVector<f64>) -> f64 {
        self.residual_vector(x).norm()
    }

    pub fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        x - self.residual_vector(x)
    }

    /// `‖Proj(x)‖`, assuming the stored vectors are orthonormal.
    pub fn proj_norm(&self, x: &DVector<f64>) -> f64 {
        self.q.iter().map(|q| q.dot(x).powi(2)).sum::<f64>().sqrt()
    }

    /// Add `v` to the span. Returns the residual of `v` before insertion.
    /// A direction with residual at most `1e-12 · ‖v‖` is dropped.
    pub fn push(&mut self, v: &DVector<f64>) -> f64 {
        let r = self.residual_vector(v);
        let n = r.norm();
        if n > 1e-12 * v.norm().max(f64::MIN_POSITIVE) && self.q.len() < self.d {
            self.q.push(r / n);
        }
        n
    }

    pub fn push_subspace(&mut self, s: &Subspace) {
        for c in s.basis().column_iter() {
            self.push(&c.into_owned());
        }
    }
}

/// Norm of the residual of `x` against the span of `list`.
pub fn residual_norm(list: &[DVector<f64>], x: &DVector<f64>) -> Result<f64> {
    let d = x.len();
    let mut b = OrthoBasis::new(d);
    for v in list {
        if v.len() != d {
            return Err(SubspaceError::DimensionMismatch {
                expected: d,
                got: v.len(),
            });
        }
        b.push(v);
    }
    Ok(b.residual(x))
}

/// `min_i ‖Proj_{span(v_1..v_{i-1})^⊥}(v_i)‖`; infinity for an empty list.
pub fn robust_independence_margin(vs: &[DVector<f64>]) -> f64 {
    let Some(first) = vs.first() else {
        return f64::INFINITY;
    };
    let mut b = OrthoBasis::new(first.len());
    let mut margin = f64::INFINITY;
    for v in vs {
        margin = margin.min(b.push(v));
    }
    margin
}

/// Whether every vector keeps a residual of at least `delta`.
pub fn is_robustly_independent(vs: &[DVector<f64>], delta: f64) -> bool {
    robust_independence_margin(vs) >= delta
}

/// The left singular vectors of `Y = [y_1 … y_r]` for the `count` largest
/// singular values, in decreasing order.
///
/// The `y_i` must be unit vectors. Fails with [`SubspaceError::Degenerate`]
/// when `Y` has numerical rank below `count`.
pub fn top_singular_vectors(ys: &[DVector<f64>], count: usize) -> Result<VectorList> {
    let Some(first) = ys.first() else {
        return if count == 0 {
            Ok(Vec::new())
        } else {
            Err(SubspaceError::Degenerate {
                effective_rank: 0,
                required: count,
            })
        };
    };
    let d = first.len();
    for (index, y) in ys.iter().enumerate() {
        if y.len() != d {
            return Err(SubspaceError::DimensionMismatch {
                expected: d,
                got: y.len(),
            });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(SubspaceError::NonFinite);
        }
        let norm = y.norm();
        if (norm - 1.0).abs() > UNIT_TOL {
            return Err(SubspaceError::NonUnit { index, norm });
        }
    }
    if count == 0 {
        return Ok(Vec::new());
    }
    let y = DMatrix::from_columns(ys);
    let svd = y.svd(true, false);
    let u = svd.u.as_ref().expect("left singular vectors requested");
    let sig = &svd.singular_values;
    let mut order: Vec<usize> = (0..sig.len()).collect();
    order.sort_by(|&a, &b| sig[b].total_cmp(&sig[a]));
    let smax = sig[order[0]];
    let cutoff = smax * 1e-12 * (d.max(ys.len()) as f64);
    let effective_rank = order.iter().filter(|&&i| sig[i] > cutoff).count();
    if effective_rank < count {
        return Err(SubspaceError::Degenerate {
            effective_rank,
            required: count,
        });
    }
    Ok(order[..count]
        .iter()
        .map(|&i| u.column(i).into_owned())
        .collect())
}

/// Number of vectors returned by the robust-independence extraction.
pub fn extraction_count(r: usize, s: usize) -> usize {
    r.div_ceil(s)
}

/// The amplification factor `(√r/δ)^{s/(s−1)}`, for `s ≥ 2`.
pub fn extraction_bound(r: usize, s: usize, delta: f64) -> f64 {
    ((r as f64).sqrt() / delta).powf(s as f64 / (s as f64 - 1.0))
}

/// A unit vector orthogonal to `span`, drawn uniformly from the complement.
pub fn random_unit_orthogonal<R: Rng + ?Sized>(span: &OrthoBasis, rng: &mut R) -> Option<DVector<f64>> {
    if span.dim() >= span.ambient_dim() {
        return None;
    }
    for _ in 0..64 {
        let g = gaussian_vector(span.ambient_dim(), rng);
        let r = span.residual_vector(&g);
        let n = r.norm();
        if n > 1e-8 * g.norm() {
            let r = span.residual_vector(&(r / n));
            return Some(&r / r.norm());
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;

    #[test]
    fn haar_orthonormal() {
        let mut rng = stream(1, "t", &[]);
        let s = sample_subspace(50, 7, &mut rng).unwrap();
        assert_eq!(s.dim(), 7);
        assert!(s.orthogonality_error() < 1e-12);
        assert!(sample_subspace(3, 4, &mut rng).is_err());
    }

    #[test]
    fn within_is_contained() {
        let mut rng = stream(2, "t", &[]);
        let parent = sample_subspace(40, 10, &mut rng).unwrap();
        let child = sample_subspace_within(&parent, 3, &mut rng).unwrap();
        assert!(parent.containment_residual(&child).unwrap() < 1e-12);
        assert!(child.orthogonality_error() < 1e-12);
    }

    #[test]
    fn degenerate_singular_vectors() {
        let v = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        let err = top_singular_vectors(&[v.clone(), v.clone(), v], 2).unwrap_err();
        assert_eq!(
            err,
            SubspaceError::Degenerate {
                effective_rank: 1,
                required: 2
            }
        );
    }

    #[test]
    fn non_unit_rejected() {
        let v = DVector::from_vec(vec![2.0, 0.0]);
        assert!(matches!(
            top_singular_vectors(&[v], 1),
            Err(SubspaceError::NonUnit { .. })
        ));
    }

    #[test]
    fn identity_columns_margin() {
        let vs: Vec<_> = (0..4)
            .map(|i| DVector::from_fn(6, |j, _| if i == j { 1.0 } else { 0.0 }))
            .collect();
        assert!((robust_independence_margin(&vs) - 1.0).abs() < 1e-15);
        assert_eq!(extraction_count(7, 2), 4);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn pythagoras(seed in any::<u64>(), d in 2usize..40, kfrac in 0.0f64..1.0) {
            let mut rng = stream(seed, "pyth", &[]);
            let k = 1 + ((d - 1) as f64 * kfrac) as usize;
            let s = sample_subspace(d, k, &mut rng).unwrap();
            let x = gaussian_vector(d, &mut rng);
            let p = s.proj_norm(&x).unwrap();
            let r = s.residual_norm(&x).unwrap();
            let lhs = p * p + r * r;
            let rhs = x.norm_squared();
            prop_assert!((lhs - rhs).abs() <= 1e-8 * rhs.max(1e-300));
        }

        #[test]
        fn projector_idempotent(seed in any::<u64>(), d in 2usize..25) {
            let mut rng = stream(seed, "idem", &[]);
            let k = 1 + (seed as usize) % (d - 1);
            let p = sample_subspace(d, k, &mut rng).unwrap().projector();
            let diff = &p * &p - &p;
            prop_assert!(diff.abs().max() < 1e-10);
        }

        #[test]
        fn residual_orthogonal(seed in any::<u64>(), d in 3usize..30) {
            let mut rng = stream(seed, "res", &[]);
            let list: Vec<_> = (0..d / 2).map(|_| gaussian_vector(d, &mut rng)).collect();
            let mut b = OrthoBasis::new(d);
            for v in &list { b.push(v); }
            let x = gaussian_vector(d, &mut rng);
            let r = b.residual_vector(&x);
            for v in &list {
                prop_assert!(r.dot(v).abs() < 1e-9 * v.norm() * x.norm());
            }
        }
    }
}
