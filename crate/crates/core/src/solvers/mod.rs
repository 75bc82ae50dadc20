//! Memory-bounded algorithms and the feasibility driver.
//!
//! An algorithm is a pair of pure maps over a bit-string memory: one emits
//! the next query, the other folds in the oracle's answer. Only the memory
//! between iterations is budgeted; scratch inside a call is free. Memory is
//! measured by its serialized bit length, so the budget is exact.

pub mod ellipsoid;
pub mod subgradient;

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::DVector;
use rand::RngCore;
use serde::Serialize;
use thiserror::Error;

use crate::bits::BitBuf;
use crate::oracle::{OracleError, OracleResponse, SeparationOracle, QUERY_NORM_TOL};

pub use ellipsoid::{central_cut, ellipsoid_solver, Ellipsoid};
pub use subgradient::{subgradient_solver, StepSchedule, Subgradient};

/// Algorithm memory.
pub type Memory = BitBuf;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("iteration {iteration}: memory of {bits} bits exceeds budget {budget}")]
    BudgetExceeded { iteration: u64, bits: usize, budget: usize },
    #[error("iteration {iteration}: query norm {norm} outside the unit ball")]
    QueryOutsideBall { iteration: u64, norm: f64 },
    #[error("malformed memory: {0}")]
    Memory(String),
    #[error("numerical degeneracy: {0}")]
    Degenerate(String),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

pub type Result<T> = std::result::Result<T, SolverError>;

/// `(query, update)` over an M-bit memory.
pub trait MemoryBoundedAlgorithm: Send + Sync {
    fn id(&self) -> String;
    fn dim(&self) -> usize;
    fn budget_bits(&self) -> usize;

    /// The starting memory; all zeros unless a game injects a message.
    fn initial_memory(&self) -> Memory {
        BitBuf::zeros(self.budget_bits())
    }

    fn query(&self, memory: &Memory, rng: &mut dyn RngCore) -> Result<DVector<f64>>;

    fn update(
        &self,
        memory: &Memory,
        x: &DVector<f64>,
        response: &OracleResponse,
        rng: &mut dyn RngCore,
    ) -> Result<Memory>;
}

/// Serialized size of a memory state in bits.
pub fn measure_memory(memory: &Memory) -> usize {
    memory.bit_len()
}

/// Fixed-width f64/u64 words, the layout both baselines use.
pub(crate) struct Words<'a> {
    reader: crate::bits::BitReader<'a>,
}

impl<'a> Words<'a> {
    pub(crate) fn new(m: &'a Memory, expected_bits: usize) -> Result<Self> {
        if m.bit_len() != expected_bits {
            return Err(SolverError::Memory(format!(
                "expected {expected_bits} bits, found {}",
                m.bit_len()
            )));
        }
        Ok(Self { reader: m.reader() })
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        let v = self
            .reader
            .read_f64()
            .ok_or_else(|| SolverError::Memory("truncated".into()))?;
        if !v.is_finite() {
            return Err(SolverError::Memory("non-finite word".into()));
        }
        Ok(v)
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        self.reader
            .read_u64()
            .ok_or_else(|| SolverError::Memory("truncated".into()))
    }
}

/// Project onto the closed unit ball.
pub fn project_unit_ball(x: DVector<f64>) -> DVector<f64> {
    let n = x.norm();
    if n > 1.0 {
        x / n
    } else {
        x
    }
}

/// What the driver saw at one iteration.
pub struct StepEvent<'a> {
    pub t: u64,
    pub x: &'a DVector<f64>,
    pub response: &'a OracleResponse,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunTrace {
    pub instance: String,
    pub algorithm: String,
    pub m_bits: usize,
    /// Queries issued.
    pub queries: u64,
    pub success: bool,
    pub wall_ms: f64,
    /// Measured memory before the first query and after every update.
    pub memory_bits: Vec<usize>,
    /// Response counts keyed by depth (`"0"` is the half-space) or `"success"`.
    pub depth_histogram: BTreeMap<String, u64>,
    pub final_query: Option<Vec<f64>>,
}

impl RunTrace {
    pub fn max_memory_bits(&self) -> usize {
        self.memory_bits.iter().copied().max().unwrap_or(0)
    }
}

/// Drive `alg` against `oracle` until Success or `t_max` queries.
pub fn run_feasibility(
    oracle: &mut dyn SeparationOracle,
    alg: &dyn MemoryBoundedAlgorithm,
    t_max: u64,
    rng: &mut dyn RngCore,
) -> Result<RunTrace> {
    run_feasibility_observed(oracle, alg, alg.initial_memory(), t_max, rng, &mut |_, _| {})
}

/// [`run_feasibility`] from a given starting memory, calling `observer` after
/// every oracle answer.
pub fn run_feasibility_observed(
    oracle: &mut dyn SeparationOracle,
    alg: &dyn MemoryBoundedAlgorithm,
    initial: Memory,
    t_max: u64,
    rng: &mut dyn RngCore,
    observer: &mut dyn FnMut(&StepEvent<'_>, &dyn SeparationOracle),
) -> Result<RunTrace> {
    let start = Instant::now();
    let budget = alg.budget_bits();
    let mut memory = initial;
    let bits = measure_memory(&memory);
    if bits > budget {
        return Err(SolverError::BudgetExceeded {
            iteration: 0,
            bits,
            budget,
        });
    }
    let mut trace = RunTrace {
        instance: oracle.describe(),
        algorithm: alg.id(),
        m_bits: budget,
        queries: 0,
        success: false,
        wall_ms: 0.0,
        memory_bits: vec![bits],
        depth_histogram: BTreeMap::new(),
        final_query: None,
    };
    for t in 1..=t_max {
        let x = alg.query(&memory, rng)?;
        let norm = x.norm();
        if !(norm <= 1.0 + QUERY_NORM_TOL) {
            return Err(SolverError::QueryOutsideBall { iteration: t, norm });
        }
        let response = oracle.respond(&x)?;
        trace.queries = t;
        let key = match response.depth() {
            Some(p) => p.to_string(),
            None => "success".to_string(),
        };
        *trace.depth_histogram.entry(key).or_insert(0) += 1;
        observer(&StepEvent { t, x: &x, response: &response }, &*oracle);
        if response.is_success() {
            trace.success = true;
            trace.final_query = Some(x.iter().copied().collect());
            break;
        }
        memory = alg.update(&memory, &x, &response, rng)?;
        let bits = measure_memory(&memory);
        if bits > budget {
            return Err(SolverError::BudgetExceeded {
                iteration: t,
                bits,
                budget,
            });
        }
        trace.memory_bits.push(bits);
    }
    trace.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(trace)
}

/// Feasible set `{x ∈ B(0,1) : eᵀx ≤ −1/2}` with only the half-space cut.
#[derive(Clone, Debug)]
pub struct HalfspaceOracle {
    e: DVector<f64>,
}

impl HalfspaceOracle {
    pub fn new(d: usize) -> Self {
        Self {
            e: crate::oracle::e_vector(d),
        }
    }
}

impl SeparationOracle for HalfspaceOracle {
    fn dim(&self) -> usize {
        self.e.len()
    }

    fn respond(&mut self, x: &DVector<f64>) -> std::result::Result<OracleResponse, OracleError> {
        crate::oracle::check_query(x, self.e.len())?;
        if self.e.dot(x) > -0.5 {
            Ok(OracleResponse::Cut {
                g: self.e.clone(),
                depth: 0,
            })
        } else {
            Ok(OracleResponse::Success)
        }
    }

    fn contains(&self, x: &DVector<f64>) -> bool {
        x.norm() <= 1.0 && self.e.dot(x) <= -0.5
    }

    fn inscribed_ball(&self) -> std::result::Result<crate::oracle::Ball, OracleError> {
        Ok(crate::oracle::Ball {
            center: &self.e * -0.75,
            radius: 0.25,
        })
    }

    fn epsilon(&self) -> f64 {
        0.25
    }

    fn describe(&self) -> String {
        format!("halfspace(d={})", self.e.len())
    }
}
