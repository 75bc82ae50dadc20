//! Hard-instance separation oracles for memory-constrained convex feasibility,
//! together with the analysis games, memory-metered baseline solvers and the
//! random-matrix lab used to probe them numerically.
//!
//! The crate is organised bottom-up:
//!
//! * [`subspace`]: Haar subspaces, projections, residuals, robust independence.
//! * [`params`]: the deterministic and randomized parameter ladders.
//! * [`oracle`]: the adaptive and the oblivious hard oracles.
//! * [`games`]: transcripts, players and win checks for the seven games.
//! * [`solvers`]: the memory-bounded algorithm model with two baselines.
//! * [`rmt`]: triangular ensembles, the coupling check and concentration tests.
//! * [`harness`]: experiment configs, result rows and the experiment runners.
//!
//! Every stochastic component draws from a named [`rng`] stream so two runs
//! with the same master seed agree bit for bit.

pub mod bits;
pub mod games;
pub mod harness;
pub mod oracle;
pub mod params;
pub mod rmt;
pub mod rng;
pub mod solvers;
pub mod subspace;

pub use nalgebra::{DMatrix, DVector};
