//! Algorithms and constructions shared by the feasibility-game players.

use nalgebra::DVector;
use rand::RngCore;

use crate::bits::BitBuf;
use crate::oracle::{feasible_direction, OracleResponse};
use crate::solvers::{Memory, MemoryBoundedAlgorithm, Result, SolverError};
use crate::subspace::{random_unit_orthogonal, random_unit_vector, OrthoBasis, VectorList};

/// Replays a script of queries stored in memory.
///
/// Layout: a `u64` cursor followed by `n` queries at 64 bits per coordinate,
/// `64(1 + n·d)` bits in total. The all-zero memory replays the zero vector.
#[derive(Clone, Debug)]
pub struct ReplayAlgorithm {
    d: usize,
    n: usize,
}

impl ReplayAlgorithm {
    pub fn new(d: usize, n: usize) -> Self {
        Self { d, n }
    }

    /// The memory that replays `script` from the start.
    pub fn script(&self, script: &[DVector<f64>]) -> BitBuf {
        let mut m = BitBuf::new();
        m.push_u64(0);
        for x in script.iter().take(self.n) {
            for v in x.iter() {
                m.push_f64(*v);
            }
        }
        m
    }

    fn cursor_and_entry(&self, memory: &Memory) -> Result<(u64, DVector<f64>)> {
        if memory.bit_len() != self.budget_bits() {
            return Err(SolverError::Memory(format!(
                "expected {} bits, found {}",
                self.budget_bits(),
                memory.bit_len()
            )));
        }
        let mut r = memory.reader();
        let cursor = r.read_u64().ok_or_else(|| SolverError::Memory("truncated".into()))?;
        let idx = (cursor as usize).min(self.n.saturating_sub(1));
        let mut x = DVector::zeros(self.d);
        if self.n > 0 {
            let skip = idx * self.d;
            for _ in 0..skip {
                r.read_u64();
            }
            for v in x.iter_mut() {
                *v = r.read_f64().ok_or_else(|| SolverError::Memory("truncated".into()))?;
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::Memory("non-finite entry".into()));
        }
        Ok((cursor, x))
    }
}

impl MemoryBoundedAlgorithm for ReplayAlgorithm {
    fn id(&self) -> String {
        format!("replay-{}", self.n)
    }

    fn dim(&self) -> usize {
        self.d
    }

    fn budget_bits(&self) -> usize {
        64 * (1 + self.n * self.d)
    }

    fn query(&self, memory: &Memory, _: &mut dyn RngCore) -> Result<DVector<f64>> {
        Ok(self.cursor_and_entry(memory)?.1)
    }

    fn update(&self, memory: &Memory, _: &DVector<f64>, _: &OracleResponse, _: &mut dyn RngCore) -> Result<Memory> {
        let (cursor, _) = self.cursor_and_entry(memory)?;
        let mut out = BitBuf::new();
        out.push_u64(cursor.saturating_add(1));
        let mut r = memory.reader();
        r.read_u64();
        while r.remaining() > 0 {
            out.push_u64(r.read_u64().ok_or_else(|| SolverError::Memory("truncated".into()))?);
        }
        Ok(out)
    }
}

/// Zero-memory queries: a fresh random point of the half-space cap
/// `eᵀx = −0.6`, `‖x‖ = 1` every round.
#[derive(Clone, Debug)]
pub struct RandomHalfspaceAlgorithm {
    d: usize,
}

impl RandomHalfspaceAlgorithm {
    pub fn new(d: usize) -> Self {
        Self { d }
    }
}

impl MemoryBoundedAlgorithm for RandomHalfspaceAlgorithm {
    fn id(&self) -> String {
        "random-halfspace".into()
    }

    fn dim(&self) -> usize {
        self.d
    }

    fn budget_bits(&self) -> usize {
        0
    }

    fn query(&self, _: &Memory, rng: &mut dyn RngCore) -> Result<DVector<f64>> {
        let mut u = random_unit_vector(self.d, rng);
        u[0] = 0.0;
        let n = u.norm();
        let mut x = if n > 0.0 { u * (0.8 / n) } else { DVector::zeros(self.d) };
        x[0] = -0.6;
        Ok(x)
    }

    fn update(&self, _: &Memory, _: &DVector<f64>, _: &OracleResponse, _: &mut dyn RngCore) -> Result<Memory> {
        Ok(BitBuf::new())
    }
}

/// `k` queries orthogonal to every hidden subspace, each in the half-space:
/// `x_j = c·f + b·u_j` with `f` the feasible direction, `c = 1/(2‖Proj⊥e‖)`
/// and `u_j` orthonormal, orthogonal to `e`, `f` and `span(E_1 … E_P)`.
/// Consecutive queries keep a residual of at least `√(1 − c²)` against the
/// earlier ones. `None` when `c > 1`.
pub fn orthogonal_exploratory_queries(
    e: &DVector<f64>,
    e_span: &OrthoBasis,
    k: usize,
    rng: &mut dyn RngCore,
) -> Option<VectorList> {
    let (f, s) = feasible_direction(e, e_span);
    let c = 0.5 / s * (1.0 + 1e-9);
    if !(c <= 1.0) {
        return None;
    }
    let b = (1.0 - c * c).max(0.0).sqrt() * (1.0 - 1e-12);
    let mut span = e_span.clone();
    span.push(e);
    span.push(&f);
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let u = random_unit_orthogonal(&span, rng)?;
        span.push(&u);
        out.push(&f * c + u * b);
    }
    Some(out)
}
