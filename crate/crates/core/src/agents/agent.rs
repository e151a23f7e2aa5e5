use std::collections::HashMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::models::{icm_reward, ride_key, ride_reward, rnd_reward, Curl, Icm, Rnd};
use super::policy::{frames_tensor, policy_outputs, sample_from, uniform_action, ActOutput, Policy, PolicyNet};
use super::ppo::{ppo_loss, PpoBatch};
use super::rollout::{check_nonempty, gae, normalize, Rollout, RunningStats};
use super::{total_reward, AgentError, AgentSpec, ExplorationKind, Hyperparams, ModelKind, Phase};
use crate::nn::{Adam, EncoderCheckpoint, EncoderSpec, Graph, ParamStore};
use crate::seed::{self, Rng};

/// Summary of one [`Agent::update`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    /// World-model loss of each minibatch, in order.
    pub model_losses: Vec<f64>,
    pub intrinsic_mean: f64,
    pub minibatches: usize,
}

impl UpdateStats {
    pub fn model_loss_mean(&self) -> Option<f64> {
        (!self.model_losses.is_empty()).then(|| self.model_losses.iter().sum::<f64>() / self.model_losses.len() as f64)
    }
}

/// A policy learner plus, for exploration agents, its world model.
#[derive(Debug, Clone)]
pub struct Agent {
    pub spec: AgentSpec,
    pub phase: Phase,
    pub store: ParamStore,
    pub net: PolicyNet,
    pub icm: Option<Icm>,
    pub rnd: Option<Rnd>,
    pub curl: Option<Curl>,
    pub adam: Adam,
    pub intrinsic_stats: RunningStats,
    ride_counts: HashMap<Vec<i32>, u32>,
    ride_steps: u64,
    act_rng: Rng,
    update_rng: Rng,
}

impl Agent {
    pub fn new(spec: AgentSpec, seed: u64) -> Result<Self, AgentError> {
        spec.validate()?;
        let mut rng = seed::stream(seed, "agent/init", 0);
        let mut store = ParamStore::new();
        let net = PolicyNet::new(&mut store, spec.encoder, &mut rng)?;
        let latent = spec.encoder.latent_dim;
        let h = &spec.hyper;
        let icm = (spec.model == ModelKind::Icm).then(|| Icm::new(&mut store, latent, h.icm_hidden, &mut rng));
        let rnd = match spec.model {
            ModelKind::Rnd => Some(Rnd::new(&mut store, spec.encoder, h.rnd_features, &mut rng)?),
            _ => None,
        };
        let curl = match spec.model {
            ModelKind::Curl => Some(Curl::new(&mut store, &net.encoder, &mut rng)?),
            _ => None,
        };
        if spec.exploration == ExplorationKind::Random {
            for id in net.pi.params().into_iter().chain(net.v.params()) {
                store.set_trainable(id, false);
            }
        }
        let phase = if spec.is_plain_ppo() { Phase::Finetune } else { Phase::Exploration };
        Ok(Self {
            adam: Adam::new(h.lr).with_max_grad_norm(h.max_grad_norm),
            spec,
            phase,
            store,
            net,
            icm,
            rnd,
            curl,
            intrinsic_stats: RunningStats::default(),
            ride_counts: HashMap::new(),
            ride_steps: 0,
            act_rng: seed::stream(seed, "agent/act", 0),
            update_rng: seed::stream(seed, "agent/update", 0),
        })
    }

    /// Task learner with fresh heads and, when given, a pre-trained encoder.
    pub fn for_finetune(
        encoder: EncoderSpec,
        hyper: Hyperparams,
        checkpoint: Option<&EncoderCheckpoint>,
        seed: u64,
    ) -> Result<Self, AgentError> {
        let mut spec = AgentSpec::new(ModelKind::None, ExplorationKind::Extrinsic)?;
        spec.encoder = checkpoint.map_or(encoder, |c| c.spec);
        if checkpoint.is_some() && spec.encoder != encoder {
            return Err(AgentError::Checkpoint(format!(
                "checkpoint encoder {:?} does not match requested {:?}",
                spec.encoder, encoder
            )));
        }
        spec.hyper = hyper;
        let mut agent = Self::new(spec, seed)?;
        if let Some(ck) = checkpoint {
            ck.apply(&mut agent.store, &agent.net.encoder)?;
        }
        Ok(agent)
    }

    pub fn hyper(&self) -> &Hyperparams {
        &self.spec.hyper
    }

    pub fn acts_randomly(&self) -> bool {
        self.spec.exploration == ExplorationKind::Random
    }

    pub fn act(&mut self, frames: &[&[u8]]) -> Result<Vec<ActOutput>, AgentError> {
        if self.acts_randomly() {
            return Ok(frames.iter().map(|_| uniform_action(&mut self.act_rng)).collect());
        }
        let outs = policy_outputs(&self.store, &self.net, frames)?;
        Ok(outs.iter().map(|(p, v)| sample_from(p, *v, &mut self.act_rng)).collect())
    }

    /// Value estimates alone, used to bootstrap truncated segments.
    pub fn values(&self, frames: &[&[u8]]) -> Result<Vec<f64>, AgentError> {
        if self.acts_randomly() {
            return Ok(vec![0.0; frames.len()]);
        }
        Ok(policy_outputs(&self.store, &self.net, frames)?.into_iter().map(|(_, v)| v).collect())
    }

    /// A standalone copy of the acting policy.
    pub fn policy(&self) -> Policy {
        let mut store = ParamStore::new();
        let mut ids = self.net.encoder.params();
        ids.extend(self.net.pi.params());
        ids.extend(self.net.v.params());
        for id in &ids {
            store.add(self.store.name(*id), self.store.get(*id).clone());
        }
        let mut shell = crate::seed::stream(0, "policy/shell", 0);
        let mut tmp = ParamStore::new();
        let net = PolicyNet::new(&mut tmp, self.spec.encoder, &mut shell).expect("validated spec");
        Policy { store, net, random: self.acts_randomly() }
    }

    /// The shared encoder with its optimizer moments.
    pub fn checkpoint(&self, step: u64, source: &str) -> EncoderCheckpoint {
        EncoderCheckpoint::capture(&self.store, &self.net.encoder, step, source).with_optimizer(&self.adam, &self.net.encoder)
    }

    /// Computes raw intrinsic rewards under the current weights and stores them in the rollout.
    pub fn compute_intrinsic(&mut self, rollout: &mut Rollout) -> Result<Vec<f64>, AgentError> {
        let kind = self.spec.exploration;
        if self.phase != Phase::Exploration || matches!(kind, ExplorationKind::Extrinsic | ExplorationKind::Random) {
            rollout.transitions_mut().for_each(|t| t.reward_int = 0.0);
            return Ok(vec![0.0; rollout.len()]);
        }
        let obs: Vec<&[u8]> = rollout.transitions().map(|t| &t.obs[..]).collect();
        let next: Vec<&[u8]> = rollout.transitions().map(|t| &t.next_obs[..]).collect();
        let actions: Vec<usize> = rollout.transitions().map(|t| t.action).collect();
        let eta = self.spec.hyper.eta;
        let chunk = super::policy::INFERENCE_CHUNK;
        let mut rewards = Vec::with_capacity(obs.len());
        for start in (0..obs.len()).step_by(chunk) {
            let end = (start + chunk).min(obs.len());
            let mut g = Graph::new(&self.store);
            let xn = g.constant(frames_tensor(&next[start..end])?);
            let zn = self.net.encoder.forward(&mut g, xn)?;
            match kind {
                ExplorationKind::ForwardError => {
                    let icm = self.icm.as_ref().ok_or_else(|| AgentError::InvalidSpec("forward error needs ICM".into()))?;
                    let x = g.constant(frames_tensor(&obs[start..end])?);
                    let z = self.net.encoder.forward(&mut g, x)?;
                    let pred = icm.predict_next(&mut g, z, &actions[start..end])?;
                    let (p, a) = (g.value(pred), g.value(zn));
                    rewards.extend((0..end - start).map(|i| icm_reward(p.row(i), a.row(i), eta)));
                }
                ExplorationKind::StatePredictionError => {
                    let rnd = self.rnd.as_ref().ok_or_else(|| AgentError::InvalidSpec("state prediction needs RND".into()))?;
                    let pred = rnd.predict(&mut g, zn)?;
                    let tgt = rnd.target(&mut g, xn)?;
                    let (p, t) = (g.value(pred), g.value(tgt));
                    rewards.extend((0..end - start).map(|i| eta * rnd_reward(p.row(i), t.row(i))));
                }
                ExplorationKind::Ride => {
                    let x = g.constant(frames_tensor(&obs[start..end])?);
                    let z = self.net.encoder.forward(&mut g, x)?;
                    let (a, b) = (g.value(z).clone(), g.value(zn).clone());
                    for i in 0..end - start {
                        let count = if self.spec.hyper.ride_count_norm {
                            if self.ride_steps.is_multiple_of(self.spec.hyper.ride_episode_len) {
                                self.ride_counts.clear();
                            }
                            let c = self.ride_counts.entry(ride_key(b.row(i))).or_insert(0);
                            *c += 1;
                            Some(*c)
                        } else {
                            None
                        };
                        self.ride_steps += 1;
                        rewards.push(eta * ride_reward(a.row(i), b.row(i), count));
                    }
                }
                ExplorationKind::Extrinsic | ExplorationKind::Random => unreachable!(),
            }
        }
        if let Some(rnd) = &mut self.rnd {
            for chunk in next.chunks(super::policy::INFERENCE_CHUNK) {
                rnd.update_obs_stats(&frames_tensor(chunk)?);
            }
        }
        for (t, r) in rollout.transitions_mut().zip(&rewards) {
            t.reward_int = *r;
        }
        Ok(rewards)
    }

    /// Intrinsic rewards computed from the rollout, then PPO and world-model training.
    pub fn update(&mut self, rollout: &mut Rollout) -> Result<UpdateStats, AgentError> {
        check_nonempty(rollout)?;
        let raw = self.compute_intrinsic(rollout)?;
        let mut stats = UpdateStats {
            intrinsic_mean: raw.iter().sum::<f64>() / raw.len() as f64,
            ..UpdateStats::default()
        };
        let scale = if self.spec.hyper.normalize_intrinsic && self.phase == Phase::Exploration {
            self.intrinsic_stats.update(&raw);
            1.0 / (self.intrinsic_stats.std() + 1e-8)
        } else {
            1.0
        };
        let h = self.spec.hyper.clone();
        let mut advantages = Vec::with_capacity(rollout.len());
        let mut returns = Vec::with_capacity(rollout.len());
        for seg in &rollout.segments {
            let rewards: Vec<f64> = seg
                .transitions
                .iter()
                .map(|t| total_reward(t.reward_ext, t.reward_int * scale, &self.spec, self.phase))
                .collect();
            let values: Vec<f64> = seg.transitions.iter().map(|t| t.value).collect();
            let dones: Vec<bool> = seg.transitions.iter().map(|t| t.done).collect();
            let (a, r) = gae(&rewards, &values, &dones, seg.bootstrap, h.gamma, h.gae_lambda);
            advantages.extend(a);
            returns.extend(r);
        }
        normalize(&mut advantages);
        let flat: Vec<_> = rollout.transitions().collect();
        let mut order: Vec<usize> = (0..flat.len()).collect();
        let train_policy = !self.acts_randomly();
        let train_model = self.phase == Phase::Exploration && self.spec.model != ModelKind::None;
        let (mut pl, mut vl, mut ent, mut n_ppo) = (0.0, 0.0, 0.0, 0usize);
        for _ in 0..h.epochs {
            order.shuffle(&mut self.update_rng);
            for mb in minibatches(&order, h.minibatch) {
                let obs: Vec<&[u8]> = mb.iter().map(|&i| &flat[i].obs[..]).collect();
                let actions: Vec<usize> = mb.iter().map(|&i| flat[i].action).collect();
                let grads = {
                    let mut g = Graph::new(&self.store);
                    let x = g.constant(frames_tensor(&obs)?);
                    let needs_phi = train_policy || self.icm.is_some();
                    let phi = if needs_phi { Some(self.net.encoder.forward(&mut g, x)?) } else { None };
                    let mut terms = Vec::new();
                    if let (true, Some(phi)) = (train_policy, phi) {
                        let (logits, v) = self.net.heads(&mut g, phi)?;
                        let batch = PpoBatch {
                            actions: actions.clone(),
                            old_log_probs: mb.iter().map(|&i| flat[i].log_prob).collect(),
                            advantages: mb.iter().map(|&i| advantages[i]).collect(),
                            returns: mb.iter().map(|&i| returns[i]).collect(),
                        };
                        let loss = ppo_loss(&mut g, logits, v, &batch, &h)?;
                        pl -= g.value(loss.surrogate).item();
                        vl += g.value(loss.value).item();
                        ent += g.value(loss.entropy).item();
                        n_ppo += 1;
                        terms.push(loss.total);
                    }
                    if train_model {
                        let model_loss = if let (Some(icm), Some(phi)) = (&self.icm, phi) {
                            let next: Vec<&[u8]> = mb.iter().map(|&i| &flat[i].next_obs[..]).collect();
                            let xn = g.constant(frames_tensor(&next)?);
                            let zn = self.net.encoder.forward(&mut g, xn)?;
                            let l = icm.loss(&mut g, phi, zn, &actions, h.beta)?;
                            stats.model_losses.push(g.value(l.forward).item());
                            l.total
                        } else if let Some(rnd) = &self.rnd {
                            let next: Vec<&[u8]> = mb.iter().map(|&i| &flat[i].next_obs[..]).collect();
                            let xn = g.constant(frames_tensor(&next)?);
                            let zn = self.net.encoder.forward(&mut g, xn)?;
                            let pred = rnd.predict(&mut g, zn)?;
                            let tgt = rnd.target(&mut g, xn)?;
                            let l = g.mse(pred, tgt)?;
                            stats.model_losses.push(g.value(l).item());
                            l
                        } else if let Some(curl) = &self.curl {
                            let l = curl.contrastive_loss(&mut g, &self.net.encoder, &obs, h.crop, &mut self.update_rng)?;
                            stats.model_losses.push(g.value(l).item());
                            l
                        } else {
                            return Err(AgentError::InvalidSpec("model missing".into()));
                        };
                        terms.push(model_loss);
                    }
                    let Some(mut total) = terms.first().copied() else { continue };
                    for t in &terms[1..] {
                        total = g.add(total, *t)?;
                    }
                    g.backward(total)?
                };
                self.store.accumulate(&grads);
                self.store.fill_missing_grads();
                self.adam.step(&mut self.store)?;
                if let Some(curl) = &mut self.curl {
                    curl.update_momentum(&self.store, &self.net.encoder, h.curl_tau);
                }
                stats.minibatches += 1;
            }
        }
        if n_ppo > 0 {
            let n = n_ppo as f64;
            (stats.policy_loss, stats.value_loss, stats.entropy) = (pl / n, vl / n, ent / n);
        }
        Ok(stats)
    }
}

/// Chunks of `size`, with a trailing singleton folded into the previous chunk.
fn minibatches(order: &[usize], size: usize) -> Vec<&[usize]> {
    let mut out: Vec<&[usize]> = order.chunks(size).collect();
    if out.len() > 1 && out.last().is_some_and(|c| c.len() == 1) {
        out.pop();
        let start = (out.len() - 1) * size;
        *out.last_mut().expect("non-empty") = &order[start..];
    }
    out
}

/// One line of the training metrics log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub step: u64,
    pub env_id: Option<usize>,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub model_loss: Option<f64>,
    pub intrinsic_mean: f64,
    pub extrinsic_mean: f64,
}

impl MetricsRecord {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("plain record")
    }

    pub fn from_line(line: &str) -> Result<Self, AgentError> {
        serde_json::from_str(line).map_err(|e| AgentError::Parse(e.to_string()))
    }
}

