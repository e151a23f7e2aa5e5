//! Fine-tuning, suite evaluation and A-Success scoring.

mod finetune;
mod metric;
mod report;
mod run;
mod scripted;
#[cfg(test)]
mod tests;

pub use finetune::{finetune, training_puzzle, FinetuneConfig, FinetuneOutcome, FINETUNE_LR};
pub use metric::{a_success, budget_weights};
pub use report::{emit_report, mean_std, ASuccessReport, ReportFiles, ReturnCurve};
pub use scripted::{ColorSeeker, UniformActor};
pub use run::{run_suite, suite_budget, SuiteActor, SuiteResult, DEFAULT_EVAL_SEED};

use thiserror::Error;

use crate::agents::AgentError;
use crate::env::EnvError;
use crate::worldgen::WorldgenError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("expected {expected} returns, got {got}")]
    Length { expected: usize, got: usize },
    #[error("return s_{index} = {value} is outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("invalid evaluation input: {0}")]
    Invalid(String),
    #[error("task mismatch: {0}")]
    TaskMismatch(String),
    #[error("report: {0}")]
    Format(String),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Worldgen(#[from] WorldgenError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
