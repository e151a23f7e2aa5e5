use std::collections::BTreeSet;
use std::sync::Arc;

use super::{CurriculumError, CurriculumState, Decision, LogRecord, DEFAULT_ALPHA, DEFAULT_BUDGET, DEFAULT_THRESHOLD};
use crate::agents::{ActOutput, Agent, AgentError, Frame, MetricsRecord, Rollout, Segment, Transition, UpdateStats};
use crate::env::{Action, Env, EnvConfig};
use crate::geom::Vec2;
use crate::nn::EncoderCheckpoint;
use crate::worldgen::PuzzleConfig;

/// Side of a coverage grid cell in metres.
pub const COVERAGE_CELL: f64 = 0.25;

/// What the exploration loop needs from a learner.
pub trait Learner {
    fn act(&mut self, frames: &[&[u8]]) -> Result<Vec<ActOutput>, AgentError>;
    fn values(&self, frames: &[&[u8]]) -> Result<Vec<f64>, AgentError>;
    fn update(&mut self, rollout: &mut Rollout) -> Result<UpdateStats, AgentError>;
    fn checkpoint(&self, step: u64, source: &str) -> EncoderCheckpoint;
    fn name(&self) -> String;
}

impl Learner for Agent {
    fn act(&mut self, frames: &[&[u8]]) -> Result<Vec<ActOutput>, AgentError> {
        Agent::act(self, frames)
    }

    fn values(&self, frames: &[&[u8]]) -> Result<Vec<f64>, AgentError> {
        Agent::values(self, frames)
    }

    fn update(&mut self, rollout: &mut Rollout) -> Result<UpdateStats, AgentError> {
        Agent::update(self, rollout)
    }

    fn checkpoint(&self, step: u64, source: &str) -> EncoderCheckpoint {
        Agent::checkpoint(self, step, source)
    }

    fn name(&self) -> String {
        self.spec.name().to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExploreConfig {
    pub threshold: f64,
    pub alpha: f64,
    pub budget: u64,
    /// Macro-steps per rollout.
    pub rollout: usize,
    /// Periodic checkpoint interval in macro-steps; 0 disables periodic checkpoints.
    pub checkpoint_every: u64,
    pub env: EnvConfig,
}

impl Default for ExploreConfig {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
            alpha: DEFAULT_ALPHA,
            budget: DEFAULT_BUDGET,
            rollout: 2048,
            checkpoint_every: 100_000,
            env: EnvConfig::sandbox(),
        }
    }
}

/// Distinct agent grid cells visited, keyed by environment.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Coverage {
    cells: BTreeSet<(usize, i64, i64)>,
}

impl Coverage {
    pub fn record(&mut self, env: usize, p: Vec2) {
        self.cells.insert((env, (p.x / COVERAGE_CELL).floor() as i64, (p.y / COVERAGE_CELL).floor() as i64));
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn envs(&self) -> BTreeSet<usize> {
        self.cells.iter().map(|c| c.0).collect()
    }
}

#[derive(Debug, Clone)]
pub struct ExploreOutcome {
    pub checkpoint: EncoderCheckpoint,
    pub log: Vec<LogRecord>,
    pub metrics: Vec<MetricsRecord>,
    pub state: CurriculumState,
    pub coverage: Coverage,
    pub terminated: bool,
}

struct Slot {
    env: Env,
    obs: Frame,
}

/// Runs open-ended exploration over `pool` until the curriculum terminates or
/// the budget is spent. `on_checkpoint` sees every periodic checkpoint and the
/// final one.
pub fn explore<L: Learner>(
    learner: &mut L,
    pool: Vec<PuzzleConfig>,
    config: &ExploreConfig,
    mut on_checkpoint: impl FnMut(&EncoderCheckpoint) -> Result<(), CurriculumError>,
) -> Result<ExploreOutcome, CurriculumError> {
    if config.rollout == 0 {
        return Err(CurriculumError::InvalidConfig("rollout length must be positive".into()));
    }
    let mut state = CurriculumState::new(pool, config.threshold, config.budget)?.with_alpha(config.alpha)?;
    let source = learner.name();
    let mut log = vec![LogRecord::Start {
        pool_size: state.pool.len(),
        threshold: state.threshold,
        alpha: state.alpha,
        budget: state.budget,
    }];
    let mut metrics = Vec::new();
    let mut coverage = Coverage::default();
    let mut slots: Vec<Option<Slot>> = (0..state.pool.len()).map(|_| None).collect();
    let mut terminated = false;
    while state.total_steps < state.budget {
        let id = state.active;
        let slot = match &mut slots[id] {
            Some(s) => s,
            empty => {
                let mut env = Env::new(config.env.clone())?;
                let obs = env.reset(&state.pool[id].config)?;
                if let Some(w) = env.world() {
                    coverage.record(id, w.agent().position);
                }
                empty.insert(Slot { env, obs: obs.pixels.into() })
            }
        };
        let n = (config.rollout as u64).min(state.budget - state.total_steps) as usize;
        let mut seg = Segment::new(id);
        for _ in 0..n {
            let out = learner.act(&[&slot.obs[..]])?[0];
            let res = slot.env.step(Action::new(out.action as i64)?)?;
            if let Some(w) = slot.env.world() {
                coverage.record(id, w.agent().position);
            }
            let mut next: Frame = Arc::from(res.observation.pixels);
            seg.transitions.push(Transition {
                obs: slot.obs.clone(),
                action: out.action,
                log_prob: out.log_prob,
                value: out.value,
                reward_ext: res.reward,
                reward_int: 0.0,
                done: res.done,
                next_obs: next.clone(),
            });
            if res.done {
                next = slot.env.reset(&state.pool[id].config)?.pixels.into();
            }
            slot.obs = next;
        }
        seg.bootstrap = learner.values(&[&slot.obs[..]])?[0];
        let prev_steps = state.total_steps;
        state.total_steps += n as u64;
        let ext_mean = seg.transitions.iter().map(|t| t.reward_ext).sum::<f64>() / n as f64;
        let mut rollout = Rollout { segments: vec![seg] };
        let stats = learner.update(&mut rollout)?;
        for &l in &stats.model_losses {
            state.record_loss(id, l)?;
        }
        let decision = state.decide()?;
        log.push(LogRecord::decision(state.total_steps, id, stats.model_losses.clone(), state.pool[id].ema, decision));
        metrics.push(MetricsRecord {
            step: state.total_steps,
            env_id: Some(id),
            policy_loss: stats.policy_loss,
            value_loss: stats.value_loss,
            entropy: stats.entropy,
            model_loss: stats.model_loss_mean(),
            intrinsic_mean: stats.intrinsic_mean,
            extrinsic_mean: ext_mean,
        });
        let k = config.checkpoint_every;
        if k > 0 && state.total_steps / k > prev_steps / k && state.total_steps < state.budget && decision != Decision::Terminate {
            on_checkpoint(&learner.checkpoint(state.total_steps, &source))?;
        }
        if decision == Decision::Terminate {
            terminated = true;
            break;
        }
    }
    let checkpoint = learner.checkpoint(state.total_steps, &source);
    on_checkpoint(&checkpoint)?;
    Ok(ExploreOutcome { checkpoint, log, metrics, state, coverage, terminated })
}
