//! Random-matrix and concentration experiments.
//!
//! * [`triangular`]: rectangular Gaussian matrices with a zero or adaptively
//!   filled lower triangle, their smallest singular value, tail estimates and
//!   the rotation coupling between the adaptive and the zero ensemble.
//! * [`concentration`]: Monte-Carlo checks of the projection, isometry,
//!   chi-square and extreme-singular-value tail bounds.
//! * [`extraction`]: the orthonormal extraction inequality for robustly
//!   independent vectors.

pub mod concentration;
pub mod extraction;
pub mod triangular;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::subspace::SubspaceError;

pub use concentration::{concentration_suite, BoundCheck, ConcConfig, ConcReport};
pub use extraction::{check_extraction, extraction_suite, ExtractionCheck, ExtractionReport};
pub use triangular::{
    couple, coupling_check, sample_triangular, smallest_singular_value, sweep, tail_experiment, write_rmt_csv,
    Coupled, CouplingReport, Lower, LowerTriangle, PermittedView, RmtCsvRow, SweepReport, TailReport,
    TriangularSpec,
};

#[derive(Debug, Error)]
pub enum RmtError {
    #[error("invalid experiment input: {0}")]
    Invalid(String),
    #[error("lower-triangle generator for row {at_row} read entry ({row}, {col}) outside its permitted view")]
    StructuralViolation { at_row: usize, row: usize, col: usize },
    #[error(transparent)]
    Subspace(#[from] SubspaceError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, RmtError>;

/// Binomial standard error of a proportion `p` over `n` trials.
pub fn binomial_se(p: f64, n: usize) -> f64 {
    let p = p.clamp(0.0, 1.0);
    (p * (1.0 - p) / n.max(1) as f64).sqrt()
}

/// An empirical tail frequency against a stated bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailVerdict {
    pub empirical: f64,
    pub bound: f64,
    /// Standard error at the bound.
    pub se: f64,
    /// The bound is at least 1 and says nothing.
    pub vacuous: bool,
    pub passes: bool,
}

impl TailVerdict {
    pub fn new(hits: usize, trials: usize, bound: f64) -> Self {
        let empirical = hits as f64 / trials.max(1) as f64;
        let se = binomial_se(bound, trials);
        Self {
            empirical,
            bound,
            se,
            vacuous: bound >= 1.0,
            passes: empirical <= bound + 3.0 * se,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_flags() {
        let v = TailVerdict::new(0, 500, 3.0 * (-4.0f64).exp());
        assert!(v.passes && !v.vacuous);
        assert!(TailVerdict::new(10, 10, 1.5).vacuous);
        assert!(!TailVerdict::new(100, 1000, 0.01).passes);
    }
}
