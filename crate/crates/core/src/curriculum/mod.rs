//! Loss-driven environment switching for open-ended exploration.

mod explore;
mod log;
mod state;

pub use explore::{explore, Coverage, ExploreConfig, ExploreOutcome, Learner, COVERAGE_CELL};
pub use log::{parse_log, replay, write_log, LogAction, LogRecord, ReplayAudit};
pub use state::{CurriculumState, Decision, PoolEntry, Selection, DEFAULT_ALPHA, DEFAULT_BUDGET, DEFAULT_THRESHOLD};

use thiserror::Error;

use crate::agents::AgentError;
use crate::env::EnvError;
use crate::worldgen::WorldgenError;

#[derive(Debug, Error)]
pub enum CurriculumError {
    #[error("environment pool is empty")]
    EmptyPool,
    #[error("unknown environment {0}")]
    UnknownEnv(usize),
    #[error("invalid loss {0}")]
    InvalidLoss(f64),
    #[error("invalid curriculum config: {0}")]
    InvalidConfig(String),
    #[error("exploration log line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Worldgen(#[from] WorldgenError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
