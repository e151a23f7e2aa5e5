use std::sync::Arc;

use super::AgentError;

pub type Frame = Arc<[u8]>;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Frame,
    pub action: usize,
    pub log_prob: f64,
    pub value: f64,
    pub reward_ext: f64,
    pub reward_int: f64,
    pub done: bool,
    pub next_obs: Frame,
}

/// A contiguous trajectory from one environment. When the last transition is
/// not terminal, `bootstrap` is the value estimate of its `next_obs`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Segment {
    pub env_id: usize,
    pub transitions: Vec<Transition>,
    pub bootstrap: f64,
}

impl Segment {
    pub fn new(env_id: usize) -> Self {
        Self { env_id, ..Self::default() }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Rollout {
    pub segments: Vec<Segment>,
}

impl Rollout {
    pub fn len(&self) -> usize {
        self.segments.iter().map(|s| s.transitions.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn transitions(&self) -> impl Iterator<Item = &Transition> {
        self.segments.iter().flat_map(|s| s.transitions.iter())
    }

    pub fn transitions_mut(&mut self) -> impl Iterator<Item = &mut Transition> {
        self.segments.iter_mut().flat_map(|s| s.transitions.iter_mut())
    }
}

/// Generalized advantage estimates and returns for one segment.
pub fn gae(rewards: &[f64], values: &[f64], dones: &[bool], bootstrap: f64, gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut acc = 0.0;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let next = if t + 1 < n { values[t + 1] } else { bootstrap };
        let delta = rewards[t] + gamma * next * live - values[t];
        acc = delta + gamma * lambda * live * acc;
        adv[t] = acc;
    }
    let ret = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, ret)
}

/// Zero-mean, unit-variance rescaling; leaves constant input centered only.
pub fn normalize(xs: &mut [f64]) {
    if xs.is_empty() {
        return;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt() + 1e-8;
    xs.iter_mut().for_each(|x| *x = (*x - mean) / sd);
}

/// Streaming mean and variance (parallel Welford merge).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunningStats {
    pub count: f64,
    pub mean: f64,
    pub var: f64,
}

impl Default for RunningStats {
    fn default() -> Self {
        Self { count: 1e-4, mean: 0.0, var: 1.0 }
    }
}

impl RunningStats {
    pub fn update(&mut self, xs: &[f64]) {
        if xs.is_empty() {
            return;
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let delta = mean - self.mean;
        let total = self.count + n;
        let m2 = self.var * self.count + var * n + delta * delta * self.count * n / total;
        self.mean += delta * n / total;
        self.var = m2 / total;
        self.count = total;
    }

    pub fn std(&self) -> f64 {
        self.var.max(0.0).sqrt()
    }
}

pub(crate) fn check_nonempty(r: &Rollout) -> Result<(), AgentError> {
    if r.is_empty() {
        Err(AgentError::EmptyBatch)
    } else {
        Ok(())
    }
}
