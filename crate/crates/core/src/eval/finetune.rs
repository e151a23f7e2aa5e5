use std::collections::BTreeSet;
use std::sync::Arc;

use super::EvalError;
use crate::agents::{Agent, Frame, Hyperparams, MetricsRecord, Policy, Rollout, Segment, Transition};
use crate::env::{Action, Env, EnvConfig};
use crate::nn::{EncoderCheckpoint, EncoderSpec};
use crate::seed;
use crate::worldgen::{generate, PuzzleConfig, Task, WorldgenError};

pub const FINETUNE_LR: f64 = 2.5e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct FinetuneConfig {
    /// Recipe for training puzzles; only the seed varies.
    pub template: PuzzleConfig,
    pub steps: u64,
    /// Environments stepped in lockstep.
    pub envs: usize,
    pub encoder: EncoderSpec,
    pub hyper: Hyperparams,
    pub seed: u64,
    /// Seeds never used for training, typically the test suite's.
    pub exclude_seeds: BTreeSet<u64>,
}

impl FinetuneConfig {
    pub fn new(task: Task, steps: u64) -> Self {
        Self {
            template: PuzzleConfig::for_task(task, 0),
            steps,
            envs: 8,
            encoder: EncoderSpec::default(),
            hyper: Hyperparams { lr: FINETUNE_LR, ..Hyperparams::default() },
            seed: 0,
            exclude_seeds: BTreeSet::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FinetuneOutcome {
    pub agent: Agent,
    pub steps: u64,
    pub metrics: Vec<MetricsRecord>,
    /// `(step, return)` for every finished training episode.
    pub episode_returns: Vec<(u64, f64)>,
    pub train_seeds: BTreeSet<u64>,
}

impl FinetuneOutcome {
    pub fn policy(&self) -> Policy {
        self.agent.policy()
    }
}

/// The next generatable training puzzle at or after `*cursor`, skipping excluded seeds.
pub fn training_puzzle(
    template: &PuzzleConfig,
    base_seed: u64,
    cursor: &mut u64,
    exclude: &BTreeSet<u64>,
) -> Result<PuzzleConfig, EvalError> {
    for _ in 0..10_000 {
        let s = seed::derive_seed(base_seed, "finetune/train", *cursor) & (i64::MAX as u64);
        *cursor += 1;
        if exclude.contains(&s) {
            continue;
        }
        let p = template.with_seed(s);
        match generate(&p) {
            Ok(_) => return Ok(p),
            Err(WorldgenError::Unsatisfiable { .. }) => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Err(EvalError::Invalid("no generatable training puzzle found".into()))
}

struct Worker {
    env: Env,
    obs: Frame,
    episode_return: f64,
}

/// PPO on task-mode puzzles with extrinsic reward. The encoder starts from
/// `checkpoint` when given. `observer` runs after every update and may stop
/// training early by returning `true`.
pub fn finetune(
    checkpoint: Option<&EncoderCheckpoint>,
    config: &FinetuneConfig,
    mut observer: impl FnMut(u64, &Agent) -> Result<bool, EvalError>,
) -> Result<FinetuneOutcome, EvalError> {
    let task = config.template.task;
    if task == Task::None {
        return Err(EvalError::TaskMismatch("fine-tuning needs a task template".into()));
    }
    if config.envs == 0 {
        return Err(EvalError::Invalid("at least one environment is required".into()));
    }
    config.template.validate()?;
    let mut agent = Agent::for_finetune(config.encoder, config.hyper.clone(), checkpoint, config.seed)?;
    let mut cursor = 0;
    let mut train_seeds = BTreeSet::new();
    let mut workers = Vec::with_capacity(config.envs);
    for _ in 0..config.envs {
        let p = training_puzzle(&config.template, config.seed, &mut cursor, &config.exclude_seeds)?;
        train_seeds.insert(p.seed);
        let mut env = Env::new(EnvConfig::for_task(task))?;
        let obs: Frame = Arc::from(env.reset(&p)?.pixels);
        workers.push(Worker { env, obs, episode_return: 0.0 });
    }
    let mut steps = 0;
    let mut metrics = Vec::new();
    let mut episode_returns = Vec::new();
    let per_env = config.hyper.rollout.div_ceil(config.envs);
    while steps < config.steps {
        let mut segments: Vec<Segment> = (0..config.envs).map(Segment::new).collect();
        for _ in 0..per_env {
            let live = (config.envs as u64).min(config.steps - steps) as usize;
            if live == 0 {
                break;
            }
            let frames: Vec<&[u8]> = workers[..live].iter().map(|w| &w.obs[..]).collect();
            let outs = agent.act(&frames)?;
            for (i, out) in outs.into_iter().enumerate() {
                let w = &mut workers[i];
                let r = w.env.step(Action::new(out.action as i64)?)?;
                w.episode_return += r.reward;
                let mut next: Frame = Arc::from(r.observation.pixels);
                segments[i].transitions.push(Transition {
                    obs: w.obs.clone(),
                    action: out.action,
                    log_prob: out.log_prob,
                    value: out.value,
                    reward_ext: r.reward,
                    reward_int: 0.0,
                    done: r.done,
                    next_obs: next.clone(),
                });
                if r.done {
                    episode_returns.push((steps + i as u64 + 1, w.episode_return));
                    w.episode_return = 0.0;
                    let p = training_puzzle(&config.template, config.seed, &mut cursor, &config.exclude_seeds)?;
                    train_seeds.insert(p.seed);
                    next = Arc::from(w.env.reset(&p)?.pixels);
                }
                w.obs = next;
            }
            steps += live as u64;
        }
        segments.retain(|s| !s.transitions.is_empty());
        let frames: Vec<&[u8]> = segments.iter().map(|s| &workers[s.env_id].obs[..]).collect();
        let boot = agent.values(&frames)?;
        for (s, b) in segments.iter_mut().zip(boot) {
            s.bootstrap = b;
        }
        let mut rollout = Rollout { segments };
        let n = rollout.len() as f64;
        let ext_mean = rollout.transitions().map(|t| t.reward_ext).sum::<f64>() / n;
        let stats = agent.update(&mut rollout)?;
        metrics.push(MetricsRecord {
            step: steps,
            env_id: None,
            policy_loss: stats.policy_loss,
            value_loss: stats.value_loss,
            entropy: stats.entropy,
            model_loss: None,
            intrinsic_mean: stats.intrinsic_mean,
            extrinsic_mean: ext_mean,
        });
        if observer(steps, &agent)? {
            break;
        }
    }
    Ok(FinetuneOutcome { agent, steps, metrics, episode_returns, train_seeds })
}
