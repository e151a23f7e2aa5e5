use std::path::Path;

use rand::Rng;

use super::AgentError;
use crate::env::{NUM_ACTIONS, OBS_CHANNELS, OBS_SIZE};
use crate::nn::{
    pixels_to_tensor, sample_categorical, softmax_rows, Encoder, EncoderCheckpoint, EncoderSpec, Graph, Linear, NnError,
    ParamStore, Tensor, Var,
};

pub const ENCODER_PREFIX: &str = "encoder";
/// Frames per batched inference pass.
pub(crate) const INFERENCE_CHUNK: usize = 64;

/// Encoder with policy and value heads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyNet {
    pub encoder: Encoder,
    pub pi: Linear,
    pub v: Linear,
}

impl PolicyNet {
    pub fn new(store: &mut ParamStore, spec: EncoderSpec, rng: &mut impl Rng) -> Result<Self, NnError> {
        let encoder = Encoder::new(store, ENCODER_PREFIX, spec, rng)?;
        let pi = Linear::new(store, "policy", spec.latent_dim, NUM_ACTIONS, 0.01, rng);
        let v = Linear::new(store, "value", spec.latent_dim, 1, 1.0, rng);
        Ok(Self { encoder, pi, v })
    }

    pub fn heads(&self, g: &mut Graph<'_>, phi: Var) -> Result<(Var, Var), NnError> {
        let logits = self.pi.forward(g, phi)?;
        let v = self.v.forward(g, phi)?;
        let n = g.shape(v)[0];
        let v = g.reshape(v, &[n])?;
        Ok((logits, v))
    }
}

/// Pixels of `frames` as an encoder input batch.
pub fn frames_tensor<P: AsRef<[u8]>>(frames: &[P]) -> Result<Tensor, NnError> {
    pixels_to_tensor(frames, OBS_SIZE, OBS_SIZE, OBS_CHANNELS)
}

/// Latent codes for `frames`, evaluated in chunks without recording gradients.
pub fn embed(store: &ParamStore, encoder: &Encoder, frames: &[&[u8]]) -> Result<Vec<Vec<f64>>, NnError> {
    let mut out = Vec::with_capacity(frames.len());
    for chunk in frames.chunks(INFERENCE_CHUNK) {
        let mut g = Graph::new(store);
        let x = g.constant(frames_tensor(chunk)?);
        let z = encoder.forward(&mut g, x)?;
        let t = g.value(z);
        out.extend((0..chunk.len()).map(|i| t.row(i).to_vec()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActOutput {
    pub action: usize,
    pub log_prob: f64,
    pub value: f64,
}

/// Action probabilities and value estimates for `frames`.
pub fn policy_outputs(store: &ParamStore, net: &PolicyNet, frames: &[&[u8]]) -> Result<Vec<(Vec<f64>, f64)>, NnError> {
    let mut out = Vec::with_capacity(frames.len());
    for chunk in frames.chunks(INFERENCE_CHUNK) {
        let mut g = Graph::new(store);
        let x = g.constant(frames_tensor(chunk)?);
        let z = net.encoder.forward(&mut g, x)?;
        let (logits, v) = net.heads(&mut g, z)?;
        let probs = softmax_rows(g.value(logits).data(), NUM_ACTIONS);
        for (i, p) in probs.chunks_exact(NUM_ACTIONS).enumerate() {
            out.push((p.to_vec(), g.value(v).data()[i]));
        }
    }
    Ok(out)
}

pub(crate) fn sample_from(probs: &[f64], value: f64, rng: &mut impl Rng) -> ActOutput {
    let action = sample_categorical(probs, rng);
    ActOutput { action, log_prob: probs[action].ln().min(0.0), value }
}

pub(crate) fn uniform_action(rng: &mut impl Rng) -> ActOutput {
    ActOutput { action: rng.random_range(0..NUM_ACTIONS), log_prob: -(NUM_ACTIONS as f64).ln(), value: 0.0 }
}

/// A standalone acting policy.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub store: ParamStore,
    pub net: PolicyNet,
    /// Ignores the network and acts uniformly at random.
    pub random: bool,
}

impl Policy {
    pub fn new(spec: EncoderSpec, rng: &mut impl Rng) -> Result<Self, AgentError> {
        let mut store = ParamStore::new();
        let net = PolicyNet::new(&mut store, spec, rng)?;
        Ok(Self { store, net, random: false })
    }

    pub fn uniform(spec: EncoderSpec, rng: &mut impl Rng) -> Result<Self, AgentError> {
        Ok(Self { random: true, ..Self::new(spec, rng)? })
    }

    pub fn spec(&self) -> EncoderSpec {
        self.net.encoder.spec
    }

    pub fn probabilities(&self, frames: &[&[u8]]) -> Result<Vec<Vec<f64>>, AgentError> {
        if self.random {
            return Ok(vec![vec![1.0 / NUM_ACTIONS as f64; NUM_ACTIONS]; frames.len()]);
        }
        Ok(policy_outputs(&self.store, &self.net, frames)?.into_iter().map(|(p, _)| p).collect())
    }

    pub fn act(&self, pixels: &[u8], rng: &mut impl Rng) -> Result<ActOutput, AgentError> {
        Ok(self.act_batch(&[pixels], rng)?[0])
    }

    pub fn act_batch(&self, frames: &[&[u8]], rng: &mut impl Rng) -> Result<Vec<ActOutput>, AgentError> {
        if self.random {
            return Ok(frames.iter().map(|_| uniform_action(rng)).collect());
        }
        let outs = policy_outputs(&self.store, &self.net, frames)?;
        Ok(outs.iter().map(|(p, v)| sample_from(p, *v, rng)).collect())
    }

    /// The most probable action, lowest index on ties. A random policy still
    /// samples uniformly.
    pub fn act_greedy(&self, pixels: &[u8], rng: &mut impl Rng) -> Result<ActOutput, AgentError> {
        if self.random {
            return Ok(uniform_action(rng));
        }
        let (p, value) = policy_outputs(&self.store, &self.net, &[pixels])?.remove(0);
        let action = p.iter().enumerate().fold(0, |best, (i, &q)| if q > p[best] { i } else { best });
        Ok(ActOutput { action, log_prob: p[action].ln().min(0.0), value })
    }

    pub fn to_checkpoint(&self, step: u64, source: &str) -> EncoderCheckpoint {
        let mut ck = EncoderCheckpoint::capture(&self.store, &self.net.encoder, step, source);
        for id in self.net.pi.params().into_iter().chain(self.net.v.params()) {
            ck.params.push((self.store.name(id).to_string(), self.store.get(id).clone()));
        }
        ck
    }

    pub fn from_checkpoint(ck: &EncoderCheckpoint) -> Result<Self, AgentError> {
        let mut rng = crate::seed::stream(0, "policy/shell", 0);
        let mut p = Self::new(ck.spec, &mut rng)?;
        let ids: Vec<_> = p.store.ids().collect();
        if ids.len() != ck.params.len() {
            return Err(AgentError::Checkpoint(format!(
                "policy needs {} parameters, file has {}",
                ids.len(),
                ck.params.len()
            )));
        }
        for (id, (name, t)) in ids.into_iter().zip(&ck.params) {
            if p.store.name(id) != name || p.store.get(id).shape() != t.shape() {
                return Err(AgentError::Checkpoint(format!("unexpected parameter {name}")));
            }
            *p.store.get_mut(id) = t.clone();
        }
        Ok(p)
    }

    pub fn save(&self, path: impl AsRef<Path>, step: u64, source: &str) -> Result<(), AgentError> {
        Ok(self.to_checkpoint(step, source).save(path)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, AgentError> {
        Self::from_checkpoint(&EncoderCheckpoint::load(path)?)
    }
}

/// Random `crop`-sized window of an observation, resized back to full size by nearest neighbour.
pub fn random_crop(pixels: &[u8], crop: usize, rng: &mut impl Rng) -> Vec<u8> {
    let crop = crop.clamp(1, OBS_SIZE);
    let (oy, ox) = (rng.random_range(0..=OBS_SIZE - crop), rng.random_range(0..=OBS_SIZE - crop));
    let mut out = Vec::with_capacity(pixels.len());
    for r in 0..OBS_SIZE {
        let sy = oy + r * crop / OBS_SIZE;
        for c in 0..OBS_SIZE {
            let sx = ox + c * crop / OBS_SIZE;
            let at = (sy * OBS_SIZE + sx) * OBS_CHANNELS;
            out.extend_from_slice(&pixels[at..at + OBS_CHANNELS]);
        }
    }
    out
}
