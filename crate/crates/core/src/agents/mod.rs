//! Policy learners and the world models that drive their exploration.

mod agent;
mod models;
mod policy;
mod ppo;
mod rollout;
mod spec;

pub use agent::{Agent, MetricsRecord, UpdateStats};
pub use models::{
    cross_entropy, icm_reward, info_nce, ride_key, ride_reward, rnd_reward, Curl, Icm, IcmLoss, Rnd,
};
pub use policy::{embed, frames_tensor, random_crop, ActOutput, Policy, PolicyNet, ENCODER_PREFIX};
pub use ppo::{clipped_objective, ppo_loss, PpoBatch, PpoLoss};
pub use rollout::{gae, normalize, Frame, Rollout, RunningStats, Segment, Transition};
pub use spec::{total_reward, AgentSpec, ExplorationKind, Hyperparams, ModelKind, Phase};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("invalid agent spec: {0}")]
    InvalidSpec(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("batch of {got} is too small, need at least {need}")]
    BatchTooSmall { need: usize, got: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("parse: {0}")]
    Parse(String),
    #[error(transparent)]
    Nn(#[from] crate::nn::NnError),
    #[error(transparent)]
    Env(#[from] crate::env::EnvError),
}
