//! Central-cut ellipsoid method.
//!
//! The ellipsoid `{y : (y − c)ᵀ A⁻¹ (y − c) ≤ 1}` is stored as its center and
//! the packed upper triangle of `A`. Memory layout (64-bit words):
//! `c_1 … c_d, A_11, A_12, …, A_dd, t, restarts, ball_cuts, flags`.
//! A zero `flags` word means "not started": the state is then `B(0, R)`.

use nalgebra::{DMatrix, DVector};
use rand::RngCore;

use super::{Memory, MemoryBoundedAlgorithm, Result, SolverError, Words};
use crate::bits::BitBuf;
use crate::oracle::OracleResponse;

const FLAG_STARTED: u64 = 1;
const MAX_BALL_CUTS: usize = 200;

#[derive(Clone, Debug)]
pub struct Ellipsoid {
    d: usize,
    radius: f64,
}

/// Ellipsoid method started from `B(0, radius)`.
pub fn ellipsoid_solver(d: usize, radius: f64) -> Result<Ellipsoid> {
    if d < 2 {
        return Err(SolverError::Degenerate("ellipsoid method needs d ≥ 2".into()));
    }
    if !(radius.is_finite() && radius > 0.0) {
        return Err(SolverError::Degenerate("initial radius must be positive".into()));
    }
    Ok(Ellipsoid { d, radius })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EllipsoidState {
    pub center: DVector<f64>,
    pub shape: DMatrix<f64>,
    pub t: u64,
    pub restarts: u64,
    pub ball_cuts: u64,
    pub flags: u64,
}

/// One central cut through `c` with normal `g`. Returns `None` if `gᵀAg`
/// is not positive.
pub fn central_cut(c: &DVector<f64>, a: &DMatrix<f64>, g: &DVector<f64>) -> Option<(DVector<f64>, DMatrix<f64>)> {
    let d = c.len() as f64;
    let ag = a * g;
    let gag = g.dot(&ag);
    if !(gag.is_finite() && gag > 0.0) {
        return None;
    }
    let b = ag / gag.sqrt();
    let c2 = c - &b * (1.0 / (d + 1.0));
    let mut a2 = (a - (&b * b.transpose()) * (2.0 / (d + 1.0))) * (d * d / (d * d - 1.0));
    a2 = (&a2 + a2.transpose()) * 0.5;
    Some((c2, a2))
}

/// Exact volume ratio of one central cut in dimension `d`.
pub fn volume_ratio(d: usize) -> f64 {
    let d = d as f64;
    d / (d + 1.0) * (d * d / (d * d - 1.0)).powf((d - 1.0) / 2.0)
}

impl Ellipsoid {
    fn words(&self) -> usize {
        self.d + self.d * (self.d + 1) / 2 + 4
    }

    pub fn decode(&self, m: &Memory) -> Result<EllipsoidState> {
        let d = self.d;
        let mut w = Words::new(m, self.budget_bits())?;
        let center = DVector::from_iterator(d, (0..d).map(|_| w.f64()).collect::<Result<Vec<_>>>()?);
        let mut shape = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in i..d {
                let v = w.f64()?;
                shape[(i, j)] = v;
                shape[(j, i)] = v;
            }
        }
        let t = w.u64()?;
        let restarts = w.u64()?;
        let ball_cuts = w.u64()?;
        let flags = w.u64()?;
        let mut s = EllipsoidState {
            center,
            shape,
            t,
            restarts,
            ball_cuts,
            flags,
        };
        if s.flags & FLAG_STARTED == 0 {
            s.center.fill(0.0);
            s.shape = DMatrix::identity(d, d) * (self.radius * self.radius);
            s.flags |= FLAG_STARTED;
        }
        Ok(s)
    }

    pub fn encode(&self, s: &EllipsoidState) -> Memory {
        let mut b = BitBuf::new();
        for v in s.center.iter() {
            b.push_f64(*v);
        }
        for i in 0..self.d {
            for j in i..self.d {
                b.push_f64(s.shape[(i, j)]);
            }
        }
        b.push_u64(s.t);
        b.push_u64(s.restarts);
        b.push_u64(s.ball_cuts);
        b.push_u64(s.flags);
        b
    }

    fn cut(&self, s: &mut EllipsoidState, g: &DVector<f64>) -> Result<()> {
        if let Some((c, a)) = central_cut(&s.center, &s.shape, g) {
            if a.clone().cholesky().is_some() {
                s.center = c;
                s.shape = a;
                return Ok(());
            }
        }
        // Lost positive-definiteness: regularize and retry once.
        s.restarts += 1;
        let scale = (s.shape.trace() / self.d as f64).abs().max(1e-300);
        s.shape += DMatrix::identity(self.d, self.d) * (1e-10 * scale);
        match central_cut(&s.center, &s.shape, g) {
            Some((c, a)) if a.clone().cholesky().is_some() => {
                s.center = c;
                s.shape = a;
                Ok(())
            }
            _ => Err(SolverError::Degenerate(format!(
                "shape matrix not positive definite after {} restarts",
                s.restarts
            ))),
        }
    }
}

impl MemoryBoundedAlgorithm for Ellipsoid {
    fn id(&self) -> String {
        format!("ellipsoid(R={})", self.radius)
    }

    fn dim(&self) -> usize {
        self.d
    }

    fn budget_bits(&self) -> usize {
        64 * self.words()
    }

    fn query(&self, memory: &Memory, _rng: &mut dyn RngCore) -> Result<DVector<f64>> {
        let c = self.decode(memory)?.center;
        Ok(super::project_unit_ball(c))
    }

    fn update(
        &self,
        memory: &Memory,
        _x: &DVector<f64>,
        response: &OracleResponse,
        _rng: &mut dyn RngCore,
    ) -> Result<Memory> {
        let mut s = self.decode(memory)?;
        s.t += 1;
        if let OracleResponse::Cut { g, .. } = response {
            if g.len() != self.d {
                return Err(SolverError::Memory("cut dimension mismatch".into()));
            }
            self.cut(&mut s, g)?;
            // Keep the center, which is the next query, inside the unit ball;
            // the feasible set lies there so these cuts lose nothing.
            let mut n = 0;
            while s.center.norm() > 1.0 && n < MAX_BALL_CUTS {
                let g = s.center.normalize();
                self.cut(&mut s, &g)?;
                s.ball_cuts += 1;
                n += 1;
            }
        }
        Ok(self.encode(&s))
    }
}
