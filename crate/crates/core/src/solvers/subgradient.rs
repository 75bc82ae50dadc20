//! Projected subgradient steps on the feasibility cuts.
//!
//! Memory layout (64-bit words): `x_1 … x_d, t, cuts, last_depth, flags`.

use nalgebra::DVector;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{project_unit_ball, Memory, MemoryBoundedAlgorithm, Result, SolverError, Words};
use crate::bits::BitBuf;
use crate::oracle::OracleResponse;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum StepSchedule {
    /// `η_t = c`.
    Constant(f64),
    /// `η_t = c/√t`.
    InvSqrt(f64),
}

impl StepSchedule {
    pub fn step(&self, t: u64) -> f64 {
        match *self {
            StepSchedule::Constant(c) => c,
            StepSchedule::InvSqrt(c) => c / (t.max(1) as f64).sqrt(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Subgradient {
    d: usize,
    schedule: StepSchedule,
}

pub fn subgradient_solver(d: usize, schedule: StepSchedule) -> Subgradient {
    Subgradient { d, schedule }
}

/// Decoded subgradient memory.
#[derive(Clone, Debug, PartialEq)]
pub struct SubgradientState {
    pub x: DVector<f64>,
    pub t: u64,
    pub cuts: u64,
    pub last_depth: u64,
    pub flags: u64,
}

impl Subgradient {
    pub fn schedule(&self) -> StepSchedule {
        self.schedule
    }

    pub fn decode(&self, m: &Memory) -> Result<SubgradientState> {
        let mut w = Words::new(m, self.budget_bits())?;
        let x = DVector::from_iterator(self.d, (0..self.d).map(|_| w.f64()).collect::<Result<Vec<_>>>()?);
        Ok(SubgradientState {
            x,
            t: w.u64()?,
            cuts: w.u64()?,
            last_depth: w.u64()?,
            flags: w.u64()?,
        })
    }

    pub fn encode(&self, s: &SubgradientState) -> Memory {
        let mut b = BitBuf::new();
        for v in s.x.iter() {
            b.push_f64(*v);
        }
        b.push_u64(s.t);
        b.push_u64(s.cuts);
        b.push_u64(s.last_depth);
        b.push_u64(s.flags);
        b
    }
}

impl MemoryBoundedAlgorithm for Subgradient {
    fn id(&self) -> String {
        match self.schedule {
            StepSchedule::Constant(c) => format!("subgradient(eta={c:e})"),
            StepSchedule::InvSqrt(c) => format!("subgradient(eta={c:e}/sqrt(t))"),
        }
    }

    fn dim(&self) -> usize {
        self.d
    }

    fn budget_bits(&self) -> usize {
        64 * (self.d + 4)
    }

    fn query(&self, memory: &Memory, _rng: &mut dyn RngCore) -> Result<DVector<f64>> {
        Ok(project_unit_ball(self.decode(memory)?.x))
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
        if let OracleResponse::Cut { g, depth } = response {
            if g.len() != self.d {
                return Err(SolverError::Memory("cut dimension mismatch".into()));
            }
            let eta = self.schedule.step(s.t);
            s.x = project_unit_ball(&s.x - g * eta);
            s.cuts += 1;
            s.last_depth = *depth as u64;
        }
        Ok(self.encode(&s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::solvers::{run_feasibility, HalfspaceOracle};

    #[test]
    fn fresh_memory_size() {
        let s = subgradient_solver(30, StepSchedule::Constant(1e-3));
        let m = s.initial_memory();
        assert_eq!(crate::solvers::measure_memory(&m), 64 * 34);
        assert_eq!(s.decode(&m).unwrap().x, DVector::zeros(30));
    }

    #[test]
    fn halfspace_drift() {
        for &eps in &[1e-1, 1e-2, 1e-3] {
            let s = subgradient_solver(10, StepSchedule::Constant(eps));
            let mut o = HalfspaceOracle::new(10);
            let tr = run_feasibility(&mut o, &s, 100_000, &mut stream(1, "s", &[])).unwrap();
            assert!(tr.success);
            assert!(tr.queries <= (0.5 / eps).ceil() as u64 + 1, "{} queries", tr.queries);
            assert!(tr.memory_bits.iter().all(|&b| b == 64 * 14));
        }
    }
}
