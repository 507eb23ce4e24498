use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::model::PolicyModel;
use super::optim::{clip_grad_norm, Adam};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoConfig {
    pub clip: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub lr: f64,
    pub epochs: usize,
    /// Samples per gradient step; 0 uses the whole batch.
    pub minibatch: usize,
    pub max_grad_norm: f64,
    pub normalize_advantages: bool,
    /// Multiplier applied to rewards before computing advantages and value
    /// targets, keeping the critic's targets near unit scale.
    pub reward_scale: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            clip: 0.2,
            gamma: 0.99,
            lambda: 0.95,
            entropy_coef: 0.01,
            value_coef: 0.5,
            lr: 3e-4,
            epochs: 4,
            minibatch: 0,
            max_grad_norm: 1.0,
            normalize_advantages: true,
            reward_scale: 1.0,
        }
    }
}

/// One decision point of a rollout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub features: Vec<f64>,
    pub act_mask: Vec<bool>,
    pub tokens: Vec<usize>,
    pub logp: f64,
    pub value: f64,
    /// Reward earned by this decision.
    pub reward: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    pub episode_return: f64,
}

/// A decision with its advantage and value target.
#[derive(Debug, Clone, PartialEq)]
pub struct PpoSample {
    pub features: Vec<f64>,
    pub act_mask: Vec<bool>,
    pub tokens: Vec<usize>,
    pub old_logp: f64,
    pub advantage: f64,
    pub ret: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub mean_return: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
}

/// Generalized advantage estimates and returns; the episode ends after the last reward.
pub fn gae(rewards: &[f64], values: &[f64], gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut next_value = 0.0;
    let mut running = 0.0;
    for t in (0..n).rev() {
        let delta = rewards[t] + gamma * next_value - values[t];
        running = delta + gamma * lambda * running;
        adv[t] = running;
        next_value = values[t];
    }
    let rets = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, rets)
}

/// Turns complete trajectories into PPO samples.
pub fn build_samples(batch: &[Trajectory], cfg: &PpoConfig) -> Vec<PpoSample> {
    let mut out = Vec::new();
    for tr in batch {
        let rewards: Vec<f64> = tr.steps.iter().map(|s| s.reward * cfg.reward_scale).collect();
        let values: Vec<f64> = tr.steps.iter().map(|s| s.value).collect();
        let (adv, rets) = gae(&rewards, &values, cfg.gamma, cfg.lambda);
        for ((s, a), r) in tr.steps.iter().zip(adv).zip(rets) {
            out.push(PpoSample {
                features: s.features.clone(),
                act_mask: s.act_mask.clone(),
                tokens: s.tokens.clone(),
                old_logp: s.logp,
                advantage: a,
                ret: r,
            });
        }
    }
    if cfg.normalize_advantages && out.len() > 1 {
        let n = out.len() as f64;
        let mean = out.iter().map(|s| s.advantage).sum::<f64>() / n;
        let var = out.iter().map(|s| (s.advantage - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        for s in &mut out {
            s.advantage = if std > 1e-8 { (s.advantage - mean) / std } else { 0.0 };
        }
    }
    out
}

/// Clipped surrogate, value and entropy terms with their gradient.
/// Returns (loss, policy loss, value loss, entropy, kl, clip fraction, gradient).
pub fn ppo_loss(model: &PolicyModel, samples: &[PpoSample], cfg: &PpoConfig) -> (f64, UpdateStats, Vec<f64>) {
    let n = samples.len().max(1) as f64;
    let mut grad = vec![0.0; model.n_params()];
    let mut st = UpdateStats::default();
    for s in samples {
        let tr = model.trace(&s.features, &s.act_mask, &s.tokens);
        let logp = tr.logp();
        let ratio = (logp - s.old_logp).exp();
        let unclipped = ratio * s.advantage;
        let clipped = ratio.clamp(1.0 - cfg.clip, 1.0 + cfg.clip) * s.advantage;
        let surrogate = unclipped.min(clipped);
        let active = unclipped <= clipped;
        if !active {
            st.clip_fraction += 1.0 / n;
        }
        let v = model.value(&s.features);
        let ent = tr.entropy();
        st.policy_loss -= surrogate / n;
        st.value_loss += 0.5 * (v - s.ret).powi(2) / n;
        st.entropy += ent / n;
        st.approx_kl += (s.old_logp - logp) / n;
        // Loss = -surrogate + c_v * value_loss - c_e * entropy, averaged.
        let a = if active { -ratio * s.advantage / n } else { 0.0 };
        model.backward(&s.features, &tr, a, -cfg.entropy_coef / n, &mut grad);
        model.value_backward(&s.features, cfg.value_coef * (v - s.ret) / n, &mut grad);
    }
    let loss = st.policy_loss + cfg.value_coef * st.value_loss - cfg.entropy_coef * st.entropy;
    (loss, st, grad)
}

fn check_finite(loss: f64, grad: &[f64]) -> Result<()> {
    if !loss.is_finite() {
        return Err(Error::NonFinite { what: "ppo loss".into(), detail: format!("loss = {loss}") });
    }
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite { what: "ppo gradient".into(), detail: format!("component {i} = {}", grad[i]) });
    }
    Ok(())
}

/// One optimizer step on `samples`. Parameters are untouched on error.
pub fn ppo_step(model: &mut PolicyModel, opt: &mut Adam, samples: &[PpoSample], cfg: &PpoConfig) -> Result<UpdateStats> {
    let (loss, stats, mut grad) = ppo_loss(model, samples, cfg);
    check_finite(loss, &grad)?;
    clip_grad_norm(&mut grad, cfg.max_grad_norm);
    opt.lr = cfg.lr;
    opt.step(&mut model.params, &grad);
    Ok(stats)
}

/// PPO update over a batch of complete trajectories.
pub fn update<R: Rng + ?Sized>(
    model: &mut PolicyModel,
    opt: &mut Adam,
    batch: &[Trajectory],
    cfg: &PpoConfig,
    rng: &mut R,
) -> Result<UpdateStats> {
    let mut samples = build_samples(batch, cfg);
    if samples.is_empty() {
        return Err(Error::Precondition("ppo update needs at least one decision".into()));
    }
    let snapshot = model.params.clone();
    let mb = if cfg.minibatch == 0 { samples.len() } else { cfg.minibatch };
    let mut last = UpdateStats::default();
    for _ in 0..cfg.epochs.max(1) {
        samples.shuffle(rng);
        for chunk in samples.chunks(mb) {
            match ppo_step(model, opt, chunk, cfg) {
                Ok(s) => last = s,
                Err(e) => {
                    model.params = snapshot;
                    return Err(e);
                }
            }
        }
    }
    last.mean_return = batch.iter().map(|t| t.episode_return).sum::<f64>() / batch.len().max(1) as f64;
    Ok(last)
}
