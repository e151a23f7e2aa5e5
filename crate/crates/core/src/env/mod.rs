//! Gym-style environment over the simulation: eight-way discrete actions,
//! frame skip, 84×84 RGB observations and per-task extrinsic rewards.

pub mod raster;

use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use raster::{rasterize, OBS_CHANNELS, OBS_LEN, OBS_SIZE};

use crate::geom::Vec2;
use crate::sim::{defaults, BodyKind, CollisionEvent, ForceCommand, SimError, WorldState};
use crate::worldgen::{generate, Mode, PuzzleConfig, Task, WorldgenError};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("episode not started")]
    NotStarted,
    #[error("episode finished")]
    EpisodeFinished,
    #[error("invalid action index {0} (expected 0..=7)")]
    InvalidAction(i64),
    #[error("invalid env config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Worldgen(#[from] WorldgenError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

pub const NUM_ACTIONS: usize = 8;

/// One of eight compass moves: index 0 is north, then clockwise in 45° steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub struct Action(u8);

impl Action {
    pub fn new(index: i64) -> Result<Self, EnvError> {
        if (0..NUM_ACTIONS as i64).contains(&index) {
            Ok(Self(index as u8))
        } else {
            Err(EnvError::InvalidAction(index))
        }
    }

    pub fn all() -> impl Iterator<Item = Action> {
        (0..NUM_ACTIONS as u8).map(Action)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn direction(self) -> Vec2 {
        let d = FRAC_1_SQRT_2;
        match self.0 {
            0 => Vec2::new(0.0, 1.0),
            1 => Vec2::new(d, d),
            2 => Vec2::new(1.0, 0.0),
            3 => Vec2::new(d, -d),
            4 => Vec2::new(0.0, -1.0),
            5 => Vec2::new(-d, -d),
            6 => Vec2::new(-1.0, 0.0),
            _ => Vec2::new(-d, d),
        }
    }
}

impl TryFrom<i64> for Action {
    type Error = EnvError;
    fn try_from(v: i64) -> Result<Self, EnvError> {
        Action::new(v)
    }
}

impl From<Action> for i64 {
    fn from(a: Action) -> i64 {
        a.0 as i64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    /// 84×84×3 bytes, row-major RGB.
    pub pixels: Vec<u8>,
    /// Positions and velocities of every body, `[x, y, vx, vy]` per body.
    pub aux_state: Option<Vec<f64>>,
}

impl Observation {
    pub fn of(world: &WorldState, with_aux: bool) -> Self {
        let aux_state = with_aux.then(|| {
            world
                .bodies
                .iter()
                .flat_map(|b| [b.position.x, b.position.y, b.velocity.x, b.velocity.y])
                .collect()
        });
        Self { pixels: rasterize(world), aux_state }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// The task's goal condition was met.
    Goal,
    /// The agent entered a danger region.
    Died,
    /// The action budget ran out.
    Budget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub tick: u64,
    pub actions: u32,
    pub termination: Option<Termination>,
    /// Goal spheres touched so far this episode.
    pub hit_low: bool,
    pub hit_high: bool,
    pub collisions: Vec<CollisionEvent>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// Payoff table for the preferences task.
pub fn preference_reward(hit_green: bool, hit_yellow: bool) -> f64 {
    match (hit_green, hit_yellow) {
        (true, true) => 1.0,
        (true, false) => 0.8,
        (false, true) => 0.2,
        (false, false) => 0.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub frame_skip: u32,
    pub mode: Mode,
    pub task: Task,
    /// `None` means unbounded (sandbox).
    pub max_episode_actions: Option<u32>,
    pub extrinsic_reward_enabled: bool,
    #[serde(default)]
    pub include_aux_state: bool,
}

impl EnvConfig {
    pub fn sandbox() -> Self {
        Self {
            frame_skip: 4,
            mode: Mode::Sandbox,
            task: Task::None,
            max_episode_actions: None,
            extrinsic_reward_enabled: false,
            include_aux_state: false,
        }
    }

    pub fn for_task(task: Task) -> Self {
        if task == Task::None {
            return Self::sandbox();
        }
        Self {
            frame_skip: 4,
            mode: Mode::Task,
            task,
            max_episode_actions: task.action_budget(),
            extrinsic_reward_enabled: true,
            include_aux_state: false,
        }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if self.frame_skip < 1 {
            return Err(EnvError::InvalidConfig("frame_skip must be >= 1".into()));
        }
        if (self.mode == Mode::Sandbox) != (self.task == Task::None) {
            return Err(EnvError::InvalidConfig("mode and task disagree".into()));
        }
        if self.max_episode_actions == Some(0) {
            return Err(EnvError::InvalidConfig("max_episode_actions must be positive".into()));
        }
        Ok(())
    }
}

/// One environment instance. Single-threaded; run many for parallel rollouts.
#[derive(Debug, Clone)]
pub struct Env {
    config: EnvConfig,
    world: Option<WorldState>,
    actions: u32,
    done: bool,
    hit_low: bool,
    hit_high: bool,
    force_magnitude: f64,
    dt: f64,
}

impl Env {
    pub fn new(config: EnvConfig) -> Result<Self, EnvError> {
        config.validate()?;
        Ok(Self {
            config,
            world: None,
            actions: 0,
            done: false,
            hit_low: false,
            hit_high: false,
            force_magnitude: defaults::FORCE_MAGNITUDE,
            dt: defaults::DT,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn config_mut(&mut self) -> &mut EnvConfig {
        &mut self.config
    }

    pub fn world(&self) -> Option<&WorldState> {
        self.world.as_ref()
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn actions_taken(&self) -> u32 {
        self.actions
    }

    /// Generates a fresh world for `puzzle` and returns its first observation.
    pub fn reset(&mut self, puzzle: &PuzzleConfig) -> Result<Observation, EnvError> {
        if puzzle.mode != self.config.mode || puzzle.task != self.config.task {
            return Err(EnvError::InvalidConfig(format!(
                "puzzle ({:?}, {}) does not match env ({:?}, {})",
                puzzle.mode,
                puzzle.task.name(),
                self.config.mode,
                self.config.task.name()
            )));
        }
        self.reset_world(generate(puzzle)?)
    }

    /// Starts an episode from an already generated world.
    pub fn reset_world(&mut self, world: WorldState) -> Result<Observation, EnvError> {
        world.validate()?;
        self.world = Some(world);
        self.actions = 0;
        self.done = false;
        self.hit_low = false;
        self.hit_high = false;
        Ok(self.observe())
    }

    pub fn observe(&self) -> Observation {
        match &self.world {
            Some(w) => Observation::of(w, self.config.include_aux_state),
            None => Observation { pixels: vec![0; OBS_LEN], aux_state: None },
        }
    }

    /// Applies `action` for `frame_skip` substeps and scores the outcome.
    pub fn step(&mut self, action: Action) -> Result<StepResult, EnvError> {
        let world = self.world.as_mut().ok_or(EnvError::NotStarted)?;
        if self.done {
            return Err(EnvError::EpisodeFinished);
        }
        let agent = world.agent_id();
        let force = ForceCommand::new(agent, action.direction(), self.force_magnitude)?;
        world.begin_macro_step();
        let task = self.config.task;
        let mut termination = None;
        for _ in 0..self.config.frame_skip {
            world.substep(&force, self.dt)?;
            if termination.is_some() {
                continue;
            }
            for ev in &world.pending_collisions {
                let Some(other) = ev.other(agent) else { continue };
                match world.body(other).map(|b| b.kind) {
                    Some(BodyKind::GoalSphereLow) => self.hit_low = true,
                    Some(BodyKind::GoalSphereHigh) => self.hit_high = true,
                    _ => {}
                }
            }
            let center = world.agent().position;
            termination = match task {
                Task::Avoidance if world.bodies_of(BodyKind::DangerRegion).any(|d| d.aabb().contains(center)) => {
                    Some(Termination::Died)
                }
                Task::GoalSeeking | Task::Avoidance | Task::ToolUse if self.hit_low => Some(Termination::Goal),
                Task::Preferences if self.hit_low && self.hit_high => Some(Termination::Goal),
                _ => None,
            };
        }
        self.actions += 1;
        if termination.is_none() && self.config.max_episode_actions.is_some_and(|n| self.actions >= n) {
            termination = Some(Termination::Budget);
        }
        let reward = match (task, termination) {
            _ if !self.config.extrinsic_reward_enabled => 0.0,
            (Task::Preferences, Some(_)) => preference_reward(self.hit_high, self.hit_low),
            (Task::GoalSeeking | Task::Avoidance | Task::ToolUse, Some(Termination::Goal)) => 1.0,
            _ => 0.0,
        };
        self.done = termination.is_some();
        let world = self.world.as_ref().expect("world present");
        Ok(StepResult {
            observation: Observation::of(world, self.config.include_aux_state),
            reward,
            done: self.done,
            info: StepInfo {
                tick: world.tick,
                actions: self.actions,
                termination,
                hit_low: self.hit_low,
                hit_high: self.hit_high,
                collisions: world.step_collisions.clone(),
            },
        })
    }
}
