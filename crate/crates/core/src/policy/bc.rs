use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::PolicyModel;
use super::optim::{clip_grad_norm, Adam};
use crate::acts::ActTriple;
use crate::error::{Error, Result};
use crate::labels::Conduct;

/// One supervised decision: state features and the acts and conduct taken.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BcExample {
    pub features: Vec<f64>,
    pub acts: Vec<ActTriple>,
    pub conduct: Conduct,
    /// Feasible acts in this state; targets are always allowed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub act_mask: Option<Vec<bool>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BcConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub max_grad_norm: f64,
    pub seed: u64,
}

impl Default for BcConfig {
    fn default() -> Self {
        Self { epochs: 10, lr: 1e-3, batch_size: 32, max_grad_norm: 5.0, seed: 0 }
    }
}

#[derive(Debug, Clone)]
struct Encoded {
    features: Vec<f64>,
    mask: Vec<bool>,
    tokens: Vec<usize>,
}

fn encode(model: &PolicyModel, corpus: &[BcExample]) -> Result<Vec<Encoded>> {
    let v = &model.vocab;
    let mut offenders = Vec::new();
    let mut out = Vec::with_capacity(corpus.len());
    for (i, ex) in corpus.iter().enumerate() {
        if ex.features.len() != model.feature_dim() {
            offenders.push(format!("example {i}: {} features, expected {}", ex.features.len(), model.feature_dim()));
            continue;
        }
        let mut tokens = Vec::new();
        for a in &ex.acts {
            match v.act_index(a) {
                Some(t) if !tokens.contains(&t) => tokens.push(t),
                Some(_) => {}
                None => offenders.push(format!("example {i}: {a}")),
            }
        }
        if tokens.len() > model.config.max_acts {
            offenders.push(format!("example {i}: {} acts exceed the limit of {}", tokens.len(), model.config.max_acts));
            continue;
        }
        let mut mask = ex.act_mask.clone().unwrap_or_else(|| vec![true; v.n_acts()]);
        mask.resize(v.n_acts(), false);
        for &t in &tokens {
            mask[t] = true;
        }
        tokens.push(v.stop());
        if model.config.conduct {
            tokens.push(v.conduct_token(ex.conduct));
        }
        out.push(Encoded { features: ex.features.clone(), mask, tokens });
    }
    if offenders.is_empty() {
        Ok(out)
    } else {
        Err(Error::Ingestion { offenders })
    }
}

fn mean_nll(model: &PolicyModel, data: &[Encoded]) -> f64 {
    data.iter()
        .map(|e| -model.trace(&e.features, &e.mask, &e.tokens).logp())
        .sum::<f64>()
        / data.len() as f64
}

/// Token-level cross-entropy training. Returns the training-set loss before
/// training followed by the loss after each epoch.
pub fn clone_behavior(model: &mut PolicyModel, corpus: &[BcExample], cfg: &BcConfig) -> Result<Vec<f64>> {
    if corpus.is_empty() {
        return Err(Error::Precondition("behavior cloning needs a non-empty corpus".into()));
    }
    let data = encode(model, corpus)?;
    let mut opt = Adam::new(model.n_params(), cfg.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut curve = vec![mean_nll(model, &data)];
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size.max(1)) {
            let n = chunk.len() as f64;
            let mut grad = vec![0.0; model.n_params()];
            for &i in chunk {
                let e = &data[i];
                let tr = model.trace(&e.features, &e.mask, &e.tokens);
                model.backward(&e.features, &tr, -1.0 / n, 0.0, &mut grad);
            }
            if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
                return Err(Error::NonFinite { what: "behavior cloning gradient".into(), detail: format!("component {i}") });
            }
            clip_grad_norm(&mut grad, cfg.max_grad_norm);
            opt.step(&mut model.params, &grad);
        }
        curve.push(mean_nll(model, &data));
    }
    Ok(curve)
}
