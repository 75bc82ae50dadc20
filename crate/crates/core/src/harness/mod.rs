//! Experiment configs, result rows and runners.
//!
//! A run is fully determined by its [`ExperimentConfig`]. Each result row
//! carries that config in `extra_json`, so [`replay_row`] can recompute any
//! row on its own.

pub mod config;
pub mod rows;
pub mod run;

use thiserror::Error;

use crate::games::GameError;
use crate::oracle::OracleError;
use crate::params::ParamsError;
use crate::solvers::SolverError;

pub use config::{ExperimentConfig, ExperimentKind, OracleKind};
pub use rows::{emit_results, parse_rows, read_rows, CsvRow, HEADER};
pub use run::{make_solver, play_game, replay_row, run_experiment, run_trial, trial_seed, RunOutput};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("runtime failure: {0}")]
    Runtime(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl HarnessError {
    /// 2 for configuration errors, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

impl From<ParamsError> for HarnessError {
    fn from(e: ParamsError) -> Self {
        HarnessError::Config(e.to_string())
    }
}

impl From<OracleError> for HarnessError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::Params(p) => p.into(),
            other => HarnessError::Runtime(other.to_string()),
        }
    }
}

impl From<SolverError> for HarnessError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::Oracle(o) => o.into(),
            other => HarnessError::Runtime(other.to_string()),
        }
    }
}

impl From<GameError> for HarnessError {
    fn from(e: GameError) -> Self {
        match e {
            GameError::Invalid(m) => HarnessError::Config(m),
            GameError::Params(p) => p.into(),
            GameError::Oracle(o) => o.into(),
            other => HarnessError::Runtime(other.to_string()),
        }
    }
}
