use rand::Rng;

use super::policy::ENCODER_PREFIX;
use crate::env::NUM_ACTIONS;
use crate::nn::{Encoder, EncoderSpec, Graph, Linear, NnError, ParamId, ParamStore, Tensor, Var};

fn one_hot(actions: &[usize]) -> Tensor {
    let mut t = Tensor::zeros(&[actions.len(), NUM_ACTIONS]);
    for (i, a) in actions.iter().enumerate() {
        t.data_mut()[i * NUM_ACTIONS + a] = 1.0;
    }
    t
}

/// Mean cross-entropy of `logits` rows against class indices.
pub fn cross_entropy(g: &mut Graph<'_>, logits: Var, labels: &[usize]) -> Result<Var, NnError> {
    let lp = g.log_softmax(logits)?;
    let picked = g.gather(lp, labels)?;
    let m = g.mean(picked);
    Ok(g.scale(m, -1.0))
}

/// Forward and inverse dynamics heads over encoder latents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Icm {
    pub fwd_hidden: Linear,
    pub fwd_out: Linear,
    pub inv_hidden: Linear,
    pub inv_out: Linear,
}

pub struct IcmLoss {
    pub total: Var,
    pub forward: Var,
    pub inverse: Var,
}

impl Icm {
    pub fn new(store: &mut ParamStore, latent: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let g = std::f64::consts::SQRT_2;
        Self {
            fwd_hidden: Linear::new(store, "icm.forward.hidden", latent + NUM_ACTIONS, hidden, g, rng),
            fwd_out: Linear::new(store, "icm.forward.out", hidden, latent, 1.0, rng),
            inv_hidden: Linear::new(store, "icm.inverse.hidden", 2 * latent, hidden, g, rng),
            inv_out: Linear::new(store, "icm.inverse.out", hidden, NUM_ACTIONS, 1.0, rng),
        }
    }

    pub fn predict_next(&self, g: &mut Graph<'_>, phi: Var, actions: &[usize]) -> Result<Var, NnError> {
        let a = g.constant(one_hot(actions));
        let x = g.concat_cols(&[phi, a])?;
        let h = self.fwd_hidden.forward(g, x)?;
        let h = g.relu(h);
        self.fwd_out.forward(g, h)
    }

    pub fn inverse_logits(&self, g: &mut Graph<'_>, phi: Var, phi_next: Var) -> Result<Var, NnError> {
        let x = g.concat_cols(&[phi, phi_next])?;
        let h = self.inv_hidden.forward(g, x)?;
        let h = g.relu(h);
        self.inv_out.forward(g, h)
    }

    /// `beta · forward MSE + (1 − beta) · inverse cross-entropy`.
    pub fn loss(&self, g: &mut Graph<'_>, phi: Var, phi_next: Var, actions: &[usize], beta: f64) -> Result<IcmLoss, NnError> {
        let pred = self.predict_next(g, phi, actions)?;
        let forward = g.mse(pred, phi_next)?;
        let logits = self.inverse_logits(g, phi, phi_next)?;
        let inverse = cross_entropy(g, logits, actions)?;
        let f = g.scale(forward, beta);
        let i = g.scale(inverse, 1.0 - beta);
        let total = g.add(f, i)?;
        Ok(IcmLoss { total, forward, inverse })
    }
}

/// `eta / 2 · ‖predicted − actual‖²`
pub fn icm_reward(predicted: &[f64], actual: &[f64], eta: f64) -> f64 {
    0.5 * eta * predicted.iter().zip(actual).map(|(p, a)| (p - a).powi(2)).sum::<f64>()
}

/// Frozen random target network and a predictor head on the shared encoder.
///
/// The target sees observations whitened per pixel by running statistics and
/// clipped to `±OBS_CLIP`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rnd {
    pub target_encoder: Encoder,
    pub target_head: Linear,
    pub predictor_head: Linear,
    pub obs_mean: Vec<f64>,
    pub obs_var: Vec<f64>,
    pub obs_count: f64,
}

impl Rnd {
    pub const TARGET_PREFIX: &'static str = "rnd.target";
    pub const OBS_CLIP: f64 = 5.0;

    pub fn new(store: &mut ParamStore, spec: EncoderSpec, features: usize, rng: &mut impl Rng) -> Result<Self, NnError> {
        let target_encoder = Encoder::new(store, Self::TARGET_PREFIX, spec, rng)?;
        let target_head = Linear::new(store, "rnd.target.out", spec.latent_dim, features, 1.0, rng);
        for id in target_encoder.params().into_iter().chain(target_head.params()) {
            store.set_trainable(id, false);
        }
        let predictor_head = Linear::new(store, "rnd.predictor.out", spec.latent_dim, features, 1.0, rng);
        let n = spec.input_len();
        Ok(Self { target_encoder, target_head, predictor_head, obs_mean: vec![0.0; n], obs_var: vec![1.0; n], obs_count: 0.0 })
    }

    /// Folds a batch `[n, c, h, w]` into the per-pixel statistics.
    pub fn update_obs_stats(&mut self, x: &Tensor) {
        let len = self.obs_mean.len();
        let n = x.len() / len.max(1);
        if n == 0 {
            return;
        }
        let nb = n as f64;
        let total = self.obs_count + nb;
        for k in 0..len {
            let vals = (0..n).map(|i| x.data()[i * len + k]);
            let mean = vals.clone().sum::<f64>() / nb;
            let var = vals.map(|v| (v - mean).powi(2)).sum::<f64>() / nb;
            let delta = mean - self.obs_mean[k];
            let m2 = self.obs_var[k] * self.obs_count + var * nb + delta * delta * self.obs_count * nb / total;
            self.obs_mean[k] += delta * nb / total;
            self.obs_var[k] = m2 / total;
        }
        self.obs_count = total;
    }

    /// Whitened, clipped copy of an input batch.
    pub fn whiten(&self, x: &Tensor) -> Tensor {
        let len = self.obs_mean.len();
        let mut out = x.clone();
        if self.obs_count == 0.0 {
            return out;
        }
        for (k, v) in out.data_mut().iter_mut().enumerate() {
            let j = k % len;
            *v = ((*v - self.obs_mean[j]) / (self.obs_var[j].sqrt() + 1e-8)).clamp(-Self::OBS_CLIP, Self::OBS_CLIP);
        }
        out
    }

    pub fn target_params(&self) -> Vec<ParamId> {
        let mut v = self.target_encoder.params();
        v.extend(self.target_head.params());
        v
    }

    /// Target features of the raw input batch `x`.
    pub fn target(&self, g: &mut Graph<'_>, x: Var) -> Result<Var, NnError> {
        let w = g.constant(self.whiten(g.value(x)));
        let z = self.target_encoder.forward(g, w)?;
        self.target_head.forward(g, z)
    }

    pub fn predict(&self, g: &mut Graph<'_>, phi: Var) -> Result<Var, NnError> {
        self.predictor_head.forward(g, phi)
    }

    /// Copies the target weights into the predictor path (`encoder` is the shared one).
    pub fn copy_target_into_predictor(&self, store: &mut ParamStore, encoder: &Encoder) {
        let src: Vec<ParamId> = self.target_params();
        let mut dst = encoder.params();
        dst.extend(self.predictor_head.params());
        for (s, d) in src.into_iter().zip(dst) {
            let t = store.get(s).clone();
            *store.get_mut(d) = t;
        }
    }
}

/// Mean squared difference between predictor and target features.
pub fn rnd_reward(predicted: &[f64], target: &[f64]) -> f64 {
    let n = predicted.len().max(1) as f64;
    predicted.iter().zip(target).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / n
}

/// `‖φ(next) − φ(obs)‖₂`, divided by `√count` when a visit count is supplied.
pub fn ride_reward(phi: &[f64], phi_next: &[f64], count: Option<u32>) -> f64 {
    let d = phi.iter().zip(phi_next).map(|(a, b)| (b - a).powi(2)).sum::<f64>().sqrt();
    match count {
        Some(c) if c > 0 => d / (c as f64).sqrt(),
        _ => d,
    }
}

/// Discretized latent used as the RIDE episodic-count key.
pub fn ride_key(phi: &[f64]) -> Vec<i32> {
    phi.iter().map(|v| (v * 10.0).round() as i32).collect()
}

/// Bilinear contrastive head plus a gradient-free momentum copy of the encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct Curl {
    pub w: ParamId,
    pub momentum: ParamStore,
    pub momentum_encoder: Encoder,
}

impl Curl {
    pub fn new(store: &mut ParamStore, encoder: &Encoder, rng: &mut impl Rng) -> Result<Self, NnError> {
        let l = encoder.spec.latent_dim;
        let w = store.add("curl.w", Tensor::new(&[l, l], crate::nn::orthogonal(l, l, 1.0, rng))?);
        let mut momentum = ParamStore::new();
        let momentum_encoder = Encoder::new(&mut momentum, ENCODER_PREFIX, encoder.spec, rng)?;
        for (d, s) in momentum_encoder.params().into_iter().zip(encoder.params()) {
            *momentum.get_mut(d) = store.get(s).clone();
            momentum.set_trainable(d, false);
        }
        Ok(Self { w, momentum, momentum_encoder })
    }

    /// Keys from the momentum encoder, as plain values.
    pub fn keys(&self, x: Tensor) -> Result<Tensor, NnError> {
        let mut g = Graph::new(&self.momentum);
        let xv = g.constant(x);
        let z = self.momentum_encoder.forward(&mut g, xv)?;
        Ok(g.value(z).clone())
    }

    /// `logits[i][j] = q_i · W k_j`
    pub fn logits(&self, g: &mut Graph<'_>, q: Var, keys: Tensor) -> Result<Var, NnError> {
        let w = g.param(self.w);
        let qw = g.matmul(q, w)?;
        let k = g.constant(keys);
        let kt = g.transpose(k)?;
        g.matmul(qw, kt)
    }

    /// InfoNCE between two random crops of each frame: queries from `encoder`, keys from the momentum copy.
    pub fn contrastive_loss(
        &self,
        g: &mut Graph<'_>,
        encoder: &Encoder,
        frames: &[&[u8]],
        crop: usize,
        rng: &mut impl Rng,
    ) -> Result<Var, super::AgentError> {
        if frames.len() < 2 {
            return Err(super::AgentError::BatchTooSmall { need: 2, got: frames.len() });
        }
        let q: Vec<Vec<u8>> = frames.iter().map(|o| super::random_crop(o, crop, rng)).collect();
        let k: Vec<Vec<u8>> = frames.iter().map(|o| super::random_crop(o, crop, rng)).collect();
        let keys = self.keys(super::frames_tensor(&k)?)?;
        let xq = g.constant(super::frames_tensor(&q)?);
        let zq = encoder.forward(g, xq)?;
        let logits = self.logits(g, zq, keys)?;
        Ok(info_nce(g, logits)?)
    }

    /// θ_m ← τ θ_m + (1 − τ) θ
    pub fn update_momentum(&mut self, store: &ParamStore, encoder: &Encoder, tau: f64) {
        for (d, s) in self.momentum_encoder.params().into_iter().zip(encoder.params()) {
            let src = store.get(s).data();
            for (m, o) in self.momentum.get_mut(d).data_mut().iter_mut().zip(src) {
                *m = tau * *m + (1.0 - tau) * o;
            }
        }
    }
}

/// Cross-entropy of a `[B, B]` logit matrix with positives on the diagonal.
pub fn info_nce(g: &mut Graph<'_>, logits: Var) -> Result<Var, NnError> {
    let b = g.shape(logits)[0];
    let labels: Vec<usize> = (0..b).collect();
    cross_entropy(g, logits, &labels)
}
