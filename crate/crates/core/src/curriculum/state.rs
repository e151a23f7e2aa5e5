use serde::{Deserialize, Serialize};

use super::CurriculumError;
use crate::worldgen::PuzzleConfig;

pub const DEFAULT_THRESHOLD: f64 = 0.001;
pub const DEFAULT_ALPHA: f64 = 0.01;
pub const DEFAULT_BUDGET: u64 = 2_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct PoolEntry {
    pub id: usize,
    pub config: PuzzleConfig,
    /// Smoothed world-model loss; `+inf` until the first loss arrives.
    pub ema: f64,
    pub losses: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Selection {
    Env(usize),
    Terminate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Continue,
    Switch { from: usize, to: usize },
    Terminate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurriculumState {
    pub pool: Vec<PoolEntry>,
    pub active: usize,
    pub total_steps: u64,
    pub threshold: f64,
    pub alpha: f64,
    pub budget: u64,
}

impl CurriculumState {
    /// Pool entries get ids `0..n` in order; the first is active.
    pub fn new(pool: Vec<PuzzleConfig>, threshold: f64, budget: u64) -> Result<Self, CurriculumError> {
        if pool.is_empty() {
            return Err(CurriculumError::EmptyPool);
        }
        let state = Self {
            pool: pool
                .into_iter()
                .enumerate()
                .map(|(id, config)| PoolEntry { id, config, ema: f64::INFINITY, losses: 0 })
                .collect(),
            active: 0,
            total_steps: 0,
            threshold,
            alpha: DEFAULT_ALPHA,
            budget,
        };
        state.validate()?;
        Ok(state)
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self, CurriculumError> {
        self.alpha = alpha;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), CurriculumError> {
        if self.pool.is_empty() {
            return Err(CurriculumError::EmptyPool);
        }
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return Err(CurriculumError::InvalidConfig(format!("threshold must be positive, got {}", self.threshold)));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(CurriculumError::InvalidConfig(format!("alpha must be in (0, 1], got {}", self.alpha)));
        }
        if self.active >= self.pool.len() {
            return Err(CurriculumError::UnknownEnv(self.active));
        }
        if self.total_steps > self.budget {
            return Err(CurriculumError::InvalidConfig("total steps exceed budget".into()));
        }
        Ok(())
    }

    pub fn entry(&self, id: usize) -> Result<&PoolEntry, CurriculumError> {
        self.pool.get(id).ok_or(CurriculumError::UnknownEnv(id))
    }

    pub fn ema(&self, id: usize) -> Result<f64, CurriculumError> {
        Ok(self.entry(id)?.ema)
    }

    pub fn record_loss(&mut self, id: usize, loss: f64) -> Result<(), CurriculumError> {
        if !(loss >= 0.0 && loss.is_finite()) {
            return Err(CurriculumError::InvalidLoss(loss));
        }
        let alpha = self.alpha;
        let e = self.pool.get_mut(id).ok_or(CurriculumError::UnknownEnv(id))?;
        e.ema = if e.losses == 0 { loss } else { (1.0 - alpha) * e.ema + alpha * loss };
        e.losses += 1;
        Ok(())
    }

    pub fn should_switch(&self) -> bool {
        self.pool[self.active].ema < self.threshold
    }

    /// Highest-EMA env still at or above the threshold, lowest id on ties.
    pub fn select_next(&self) -> Result<Selection, CurriculumError> {
        if self.pool.is_empty() {
            return Err(CurriculumError::EmptyPool);
        }
        let mut best: Option<&PoolEntry> = None;
        for e in &self.pool {
            if e.ema >= self.threshold && best.is_none_or(|b| e.ema > b.ema) {
                best = Some(e);
            }
        }
        Ok(best.map_or(Selection::Terminate, |e| Selection::Env(e.id)))
    }

    /// Applies the switching rule to the active env. An env with no recorded
    /// loss always continues.
    pub fn decide(&mut self) -> Result<Decision, CurriculumError> {
        if self.pool[self.active].losses == 0 || !self.should_switch() {
            return Ok(Decision::Continue);
        }
        match self.select_next()? {
            Selection::Env(to) => {
                let from = self.active;
                self.active = to;
                Ok(Decision::Switch { from, to })
            }
            Selection::Terminate => Ok(Decision::Terminate),
        }
    }
}
