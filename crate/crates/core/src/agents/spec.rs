use std::fmt;

use serde::{Deserialize, Serialize};

use super::AgentError;
use crate::nn::EncoderSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    None,
    Icm,
    Rnd,
    Curl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplorationKind {
    Extrinsic,
    ForwardError,
    StatePredictionError,
    Ride,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Exploration,
    Finetune,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub lr: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub rollout: usize,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub max_grad_norm: f64,
    /// Intrinsic reward scale.
    pub eta: f64,
    /// Forward-loss weight in the ICM objective; the inverse loss gets `1 - beta`.
    pub beta: f64,
    /// Fraction of the momentum encoder retained at each update.
    pub curl_tau: f64,
    pub crop: usize,
    pub ride_count_norm: bool,
    pub ride_episode_len: u64,
    pub icm_hidden: usize,
    pub rnd_features: usize,
    pub normalize_intrinsic: bool,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            gamma: 0.99,
            gae_lambda: 0.95,
            clip: 0.2,
            epochs: 4,
            minibatch: 256,
            rollout: 2048,
            entropy_coef: 0.01,
            value_coef: 0.5,
            max_grad_norm: 0.5,
            eta: 1.0,
            beta: 0.2,
            curl_tau: 0.995,
            crop: 64,
            ride_count_norm: false,
            ride_episode_len: 512,
            icm_hidden: 128,
            rnd_features: 64,
            normalize_intrinsic: true,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<(), AgentError> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        let checks = [
            (self.lr > 0.0 && self.lr.is_finite(), "lr must be positive"),
            (unit(self.gamma) && unit(self.gae_lambda), "gamma and gae_lambda must lie in [0, 1]"),
            (self.clip > 0.0, "clip must be positive"),
            (self.epochs > 0 && self.minibatch > 0 && self.rollout > 0, "epochs, minibatch and rollout must be positive"),
            (self.entropy_coef >= 0.0 && self.value_coef >= 0.0, "loss coefficients must be non-negative"),
            (self.max_grad_norm > 0.0, "max_grad_norm must be positive"),
            (self.eta >= 0.0 && unit(self.beta), "eta must be non-negative and beta in [0, 1]"),
            (unit(self.curl_tau), "curl_tau must lie in [0, 1]"),
            (self.crop > 0, "crop must be positive"),
            (self.ride_episode_len > 0, "ride_episode_len must be positive"),
            (self.icm_hidden > 0 && self.rnd_features > 0, "model widths must be positive"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(AgentError::InvalidSpec((*msg).into())),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub model: ModelKind,
    pub exploration: ExplorationKind,
    #[serde(default = "yes")]
    pub share_encoder: bool,
    #[serde(default)]
    pub encoder: EncoderSpec,
    #[serde(default)]
    pub hyper: Hyperparams,
}

fn yes() -> bool {
    true
}

impl AgentSpec {
    pub const NAMED: [(&'static str, ModelKind, ExplorationKind); 7] = [
        ("icm", ModelKind::Icm, ExplorationKind::ForwardError),
        ("rnd", ModelKind::Rnd, ExplorationKind::StatePredictionError),
        ("icm+ride", ModelKind::Icm, ExplorationKind::Ride),
        ("rnd+ride", ModelKind::Rnd, ExplorationKind::Ride),
        ("curl+ride", ModelKind::Curl, ExplorationKind::Ride),
        ("curl+random", ModelKind::Curl, ExplorationKind::Random),
        ("ppo", ModelKind::None, ExplorationKind::Extrinsic),
    ];

    pub fn new(model: ModelKind, exploration: ExplorationKind) -> Result<Self, AgentError> {
        let spec = Self {
            model,
            exploration,
            share_encoder: true,
            encoder: EncoderSpec::default(),
            hyper: Hyperparams::default(),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Looks up one of the named agents, e.g. `"curl+ride"`.
    pub fn named(name: &str) -> Result<Self, AgentError> {
        let key = name.to_ascii_lowercase().replace(' ', "");
        Self::NAMED
            .iter()
            .find(|(n, ..)| *n == key)
            .ok_or_else(|| AgentError::InvalidSpec(format!("unknown agent {name:?}")))
            .and_then(|(_, m, e)| Self::new(*m, *e))
    }

    pub fn name(&self) -> &'static str {
        Self::NAMED.iter().find(|(_, m, e)| *m == self.model && *e == self.exploration).map_or("custom", |(n, ..)| n)
    }

    pub fn is_plain_ppo(&self) -> bool {
        self.model == ModelKind::None
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        if !Self::NAMED.iter().any(|(_, m, e)| *m == self.model && *e == self.exploration) {
            return Err(AgentError::InvalidSpec(format!(
                "unsupported combination {:?} + {:?}",
                self.model, self.exploration
            )));
        }
        if !self.share_encoder && !self.is_plain_ppo() {
            return Err(AgentError::InvalidSpec("exploration agents must share the encoder".into()));
        }
        self.encoder.validate()?;
        self.hyper.validate()
    }
}

impl fmt::Display for AgentSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The reward a learner optimizes in a given phase.
pub fn total_reward(reward_ext: f64, reward_int: f64, spec: &AgentSpec, phase: Phase) -> f64 {
    match (spec.is_plain_ppo(), phase) {
        (true, _) | (false, Phase::Finetune) => reward_ext,
        (false, Phase::Exploration) => reward_int,
    }
}
