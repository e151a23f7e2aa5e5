use super::Hyperparams;
use crate::nn::{Graph, NnError, Tensor, Var};

/// Per-sample clipped surrogate `min(ρA, clip(ρ, 1−ε, 1+ε)A)`.
pub fn clipped_objective(ratio: f64, advantage: f64, clip: f64) -> f64 {
    (ratio * advantage).min(ratio.clamp(1.0 - clip, 1.0 + clip) * advantage)
}

/// Inputs of one PPO minibatch.
#[derive(Debug, Clone, PartialEq)]
pub struct PpoBatch {
    pub actions: Vec<usize>,
    pub old_log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

pub struct PpoLoss {
    pub total: Var,
    /// Mean clipped surrogate objective (maximized).
    pub surrogate: Var,
    pub value: Var,
    pub entropy: Var,
}

/// `−surrogate + c_v · value MSE − c_e · entropy` from policy logits `[n, A]` and values `[n]`.
pub fn ppo_loss(g: &mut Graph<'_>, logits: Var, values: Var, batch: &PpoBatch, h: &Hyperparams) -> Result<PpoLoss, NnError> {
    let n = batch.actions.len();
    let lp_all = g.log_softmax(logits)?;
    let lp = g.gather(lp_all, &batch.actions)?;
    let old = g.constant(Tensor::new(&[n], batch.old_log_probs.clone())?);
    let diff = g.sub(lp, old)?;
    let ratio = g.exp(diff);
    let adv = g.constant(Tensor::new(&[n], batch.advantages.clone())?);
    let s1 = g.mul(ratio, adv)?;
    let clipped = g.clamp(ratio, 1.0 - h.clip, 1.0 + h.clip);
    let s2 = g.mul(clipped, adv)?;
    let m = g.minimum(s1, s2)?;
    let surrogate = g.mean(m);
    let ret = g.constant(Tensor::new(&[n], batch.returns.clone())?);
    let value = g.mse(values, ret)?;
    let p = g.exp(lp_all);
    let plogp = g.mul(p, lp_all)?;
    let h_rows = g.sum_rows(plogp)?;
    let neg_h = g.mean(h_rows);
    let entropy = g.scale(neg_h, -1.0);
    let a = g.scale(surrogate, -1.0);
    let b = g.scale(value, h.value_coef);
    let c = g.scale(entropy, -h.entropy_coef);
    let ab = g.add(a, b)?;
    let total = g.add(ab, c)?;
    Ok(PpoLoss { total, surrogate, value, entropy })
}
