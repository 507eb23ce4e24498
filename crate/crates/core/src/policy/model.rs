use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::vocab::{Token, Vocabulary};
use crate::acts::ActTriple;
use crate::error::{Error, Result};
use crate::labels::Conduct;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyConfig {
    pub hidden: usize,
    pub embed: usize,
    pub value_hidden: usize,
    pub max_acts: usize,
    /// Feed the perceived emotion to the decoder.
    pub emotion_features: bool,
    /// Decode a conduct token after STOP; otherwise conduct is always neutral.
    pub conduct: bool,
    pub seed: u64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            hidden: 128,
            embed: 32,
            value_hidden: 64,
            max_acts: 6,
            emotion_features: true,
            conduct: true,
            seed: 0,
        }
    }
}

impl PolicyConfig {
    /// Emotion features off and conduct disabled.
    pub fn baseline(mut self) -> Self {
        self.emotion_features = false;
        self.conduct = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.embed == 0 || self.value_hidden == 0 || self.max_acts == 0 {
            return Err(Error::Config("policy dimensions must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecodeMode {
    Sample,
    Greedy,
}

/// Offsets of each parameter block inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Layout {
    f: usize,
    v: usize,
    h: usize,
    e: usize,
    vh: usize,
    emb: usize,
    w_e: usize,
    w_h: usize,
    w_x: usize,
    b_h: usize,
    w_o: usize,
    b_o: usize,
    v_w1: usize,
    v_b1: usize,
    v_w2: usize,
    v_b2: usize,
    total: usize,
}

impl Layout {
    fn new(f: usize, v: usize, h: usize, e: usize, vh: usize) -> Self {
        let mut at = 0;
        let mut take = |n: usize| {
            let o = at;
            at += n;
            o
        };
        let emb = take((v + 1) * e);
        let w_e = take(h * e);
        let w_h = take(h * h);
        let w_x = take(h * f);
        let b_h = take(h);
        let w_o = take(v * h);
        let b_o = take(v);
        let v_w1 = take(vh * f);
        let v_b1 = take(vh);
        let v_w2 = take(vh);
        let v_b2 = take(1);
        Self { f, v, h, e, vh, emb, w_e, w_h, w_x, b_h, w_o, b_o, v_w1, v_b1, v_w2, v_b2, total: at }
    }
}

/// `out += m · x` for row-major `m` of shape `out.len() × x.len()`.
fn matvec_add(m: &[f64], x: &[f64], out: &mut [f64]) {
    let n = x.len();
    for (i, o) in out.iter_mut().enumerate() {
        let row = &m[i * n..(i + 1) * n];
        *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `out += mᵀ · y`.
fn matvec_t_add(m: &[f64], y: &[f64], out: &mut [f64]) {
    let n = out.len();
    for (i, yi) in y.iter().enumerate() {
        if *yi == 0.0 {
            continue;
        }
        let row = &m[i * n..(i + 1) * n];
        for (o, a) in out.iter_mut().zip(row) {
            *o += a * yi;
        }
    }
}

/// `g += y ⊗ x`.
fn outer_add(g: &mut [f64], y: &[f64], x: &[f64]) {
    let n = x.len();
    for (i, yi) in y.iter().enumerate() {
        if *yi == 0.0 {
            continue;
        }
        let row = &mut g[i * n..(i + 1) * n];
        for (gv, xv) in row.iter_mut().zip(x) {
            *gv += yi * xv;
        }
    }
}

/// Masked softmax; disallowed entries get probability zero.
pub fn masked_softmax(logits: &[f64], allowed: &[bool]) -> Vec<f64> {
    let max = logits
        .iter()
        .zip(allowed)
        .filter(|(_, a)| **a)
        .map(|(l, _)| *l)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = logits
        .iter()
        .zip(allowed)
        .map(|(l, a)| if *a { (l - max).exp() } else { 0.0 })
        .collect();
    let s: f64 = p.iter().sum();
    for v in &mut p {
        *v /= s;
    }
    p
}

fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|v| **v > 0.0).map(|v| v * v.ln()).sum::<f64>()
}

/// Forward pass over one decision, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct Trace {
    inputs: Vec<usize>,
    hs: Vec<Vec<f64>>,
    probs: Vec<Vec<f64>>,
    targets: Vec<usize>,
}

impl Trace {
    pub fn logp(&self) -> f64 {
        self.probs
            .iter()
            .zip(&self.targets)
            .map(|(p, t)| p[*t].ln())
            .sum()
    }

    /// Summed per-step entropy.
    pub fn entropy(&self) -> f64 {
        self.probs.iter().map(|p| entropy(p)).sum()
    }

    /// Distribution of step `t`.
    pub fn probs(&self, t: usize) -> &[f64] {
        &self.probs[t]
    }
}

/// One decoded system decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub acts: Vec<ActTriple>,
    pub conduct: Conduct,
    /// Decoded output tokens in order, STOP and conduct included.
    pub tokens: Vec<usize>,
    pub logp: f64,
    pub value: f64,
    pub entropy: f64,
}

/// Recurrent act-sequence decoder with a separate value network.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyModel {
    pub config: PolicyConfig,
    pub vocab: Vocabulary,
    pub params: Vec<f64>,
    layout: Layout,
}

impl PolicyModel {
    pub fn new(config: PolicyConfig, vocab: Vocabulary, feature_dim: usize) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(feature_dim, vocab.len(), config.hidden, config.embed, config.value_hidden);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = vec![0.0; layout.total];
        let mut fill = |off: usize, n: usize, scale: f64| {
            for p in &mut params[off..off + n] {
                *p = rng.gen_range(-scale..scale);
            }
        };
        let (f, v, h, e, vh) = (layout.f, layout.v, layout.h, layout.e, layout.vh);
        fill(layout.emb, (v + 1) * e, 1.0);
        fill(layout.w_e, h * e, 1.0 / (e as f64).sqrt());
        fill(layout.w_h, h * h, 0.5 / (h as f64).sqrt());
        fill(layout.w_x, h * f, 1.0 / (f.max(1) as f64).sqrt());
        fill(layout.w_o, v * h, 0.1 / (h as f64).sqrt());
        fill(layout.v_w1, vh * f, 1.0 / (f.max(1) as f64).sqrt());
        fill(layout.v_w2, vh, 0.1 / (vh as f64).sqrt());
        Ok(Self { config, vocab, params, layout })
    }

    pub fn feature_dim(&self) -> usize {
        self.layout.f
    }

    pub fn n_params(&self) -> usize {
        self.layout.total
    }

    /// Tokens allowed at a step, given the acts already emitted.
    pub fn allowed(&self, act_mask: &[bool], used: &[usize], in_conduct: bool) -> Vec<bool> {
        let v = &self.vocab;
        let mut a = vec![false; v.len()];
        if in_conduct {
            for c in Conduct::ALL {
                a[v.conduct_token(c)] = true;
            }
            return a;
        }
        a[v.stop()] = true;
        if used.len() < self.config.max_acts {
            for i in 0..v.n_acts() {
                a[i] = act_mask.get(i).copied().unwrap_or(true) && !used.contains(&i);
            }
        }
        a
    }

    fn x_proj(&self, x: &[f64]) -> Vec<f64> {
        let l = &self.layout;
        let p = &self.params;
        let mut out = p[l.b_h..l.b_h + l.h].to_vec();
        matvec_add(&p[l.w_x..l.w_x + l.h * l.f], x, &mut out);
        out
    }

    fn step(&self, h_prev: &[f64], input: usize, xp: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let l = &self.layout;
        let p = &self.params;
        let mut a = xp.to_vec();
        matvec_add(&p[l.w_h..l.w_h + l.h * l.h], h_prev, &mut a);
        let emb = &p[l.emb + input * l.e..l.emb + (input + 1) * l.e];
        matvec_add(&p[l.w_e..l.w_e + l.h * l.e], emb, &mut a);
        let h: Vec<f64> = a.iter().map(|v| v.tanh()).collect();
        let mut z = p[l.b_o..l.b_o + l.v].to_vec();
        matvec_add(&p[l.w_o..l.w_o + l.v * l.h], &h, &mut z);
        (h, z)
    }

    fn check_input(&self, x: &[f64]) {
        assert_eq!(x.len(), self.layout.f, "feature length mismatch");
    }

    /// Teacher-forced forward pass over `targets`.
    pub fn trace(&self, x: &[f64], act_mask: &[bool], targets: &[usize]) -> Trace {
        self.check_input(x);
        let xp = self.x_proj(x);
        let mut h = vec![0.0; self.layout.h];
        let mut input = self.vocab.bos();
        let mut used: Vec<usize> = Vec::new();
        let mut in_conduct = false;
        let mut tr = Trace {
            inputs: Vec::with_capacity(targets.len()),
            hs: vec![h.clone()],
            probs: Vec::with_capacity(targets.len()),
            targets: targets.to_vec(),
        };
        for &t in targets {
            let allowed = self.allowed(act_mask, &used, in_conduct);
            let (hn, z) = self.step(&h, input, &xp);
            tr.inputs.push(input);
            tr.probs.push(masked_softmax(&z, &allowed));
            tr.hs.push(hn.clone());
            h = hn;
            input = t;
            if t == self.vocab.stop() {
                in_conduct = true;
            } else if t < self.vocab.n_acts() {
                used.push(t);
            }
        }
        tr
    }

    /// Accumulates into `grad` the gradient of `a · logp + c · entropy`.
    pub fn backward(&self, x: &[f64], tr: &Trace, a: f64, c: f64, grad: &mut [f64]) {
        let l = self.layout;
        let p = &self.params;
        let steps = tr.targets.len();
        let mut dh_next = vec![0.0; l.h];
        let mut da_sum = vec![0.0; l.h];
        for t in (0..steps).rev() {
            let probs = &tr.probs[t];
            let ent = entropy(probs);
            let mut dz = vec![0.0; l.v];
            for j in 0..l.v {
                let pj = probs[j];
                if pj > 0.0 {
                    let ind = if j == tr.targets[t] { 1.0 } else { 0.0 };
                    dz[j] = a * (ind - pj) - c * pj * (pj.ln() + ent);
                }
            }
            let h = &tr.hs[t + 1];
            let h_prev = &tr.hs[t];
            outer_add(&mut grad[l.w_o..l.w_o + l.v * l.h], &dz, h);
            for (g, d) in grad[l.b_o..l.b_o + l.v].iter_mut().zip(&dz) {
                *g += d;
            }
            let mut dh = dh_next.clone();
            matvec_t_add(&p[l.w_o..l.w_o + l.v * l.h], &dz, &mut dh);
            let da: Vec<f64> = dh.iter().zip(h).map(|(d, hv)| d * (1.0 - hv * hv)).collect();
            outer_add(&mut grad[l.w_h..l.w_h + l.h * l.h], &da, h_prev);
            let inp = tr.inputs[t];
            let emb_off = l.emb + inp * l.e;
            let emb = p[emb_off..emb_off + l.e].to_vec();
            outer_add(&mut grad[l.w_e..l.w_e + l.h * l.e], &da, &emb);
            matvec_t_add(&p[l.w_e..l.w_e + l.h * l.e], &da, &mut grad[emb_off..emb_off + l.e]);
            for (s, d) in da_sum.iter_mut().zip(&da) {
                *s += d;
            }
            dh_next = vec![0.0; l.h];
            matvec_t_add(&p[l.w_h..l.w_h + l.h * l.h], &da, &mut dh_next);
        }
        outer_add(&mut grad[l.w_x..l.w_x + l.h * l.f], &da_sum, x);
        for (g, d) in grad[l.b_h..l.b_h + l.h].iter_mut().zip(&da_sum) {
            *g += d;
        }
    }

    /// State value estimate.
    pub fn value(&self, x: &[f64]) -> f64 {
        self.check_input(x);
        let l = &self.layout;
        let p = &self.params;
        let mut hid = p[l.v_b1..l.v_b1 + l.vh].to_vec();
        matvec_add(&p[l.v_w1..l.v_w1 + l.vh * l.f], x, &mut hid);
        p[l.v_b2]
            + hid
                .iter()
                .zip(&p[l.v_w2..l.v_w2 + l.vh])
                .map(|(h, w)| h.tanh() * w)
                .sum::<f64>()
    }

    /// Accumulates the gradient of `coef · value(x)`.
    pub fn value_backward(&self, x: &[f64], coef: f64, grad: &mut [f64]) {
        let l = self.layout;
        let p = &self.params;
        let mut pre = p[l.v_b1..l.v_b1 + l.vh].to_vec();
        matvec_add(&p[l.v_w1..l.v_w1 + l.vh * l.f], x, &mut pre);
        grad[l.v_b2] += coef;
        let mut dpre = vec![0.0; l.vh];
        for k in 0..l.vh {
            let hk = pre[k].tanh();
            grad[l.v_w2 + k] += coef * hk;
            dpre[k] = coef * p[l.v_w2 + k] * (1.0 - hk * hk);
        }
        outer_add(&mut grad[l.v_w1..l.v_w1 + l.vh * l.f], &dpre, x);
        for (g, d) in grad[l.v_b1..l.v_b1 + l.vh].iter_mut().zip(&dpre) {
            *g += d;
        }
    }

    /// Distribution over the first token.
    pub fn first_token_probs(&self, x: &[f64], act_mask: &[bool]) -> Vec<f64> {
        self.check_input(x);
        let (_, z) = self.step(&vec![0.0; self.layout.h], self.vocab.bos(), &self.x_proj(x));
        masked_softmax(&z, &self.allowed(act_mask, &[], false))
    }

    /// Decodes acts until STOP (forced after `max_acts`), then one conduct token.
    pub fn decide<R: Rng + ?Sized>(&self, x: &[f64], act_mask: &[bool], mode: DecodeMode, rng: &mut R) -> Decision {
        self.check_input(x);
        let xp = self.x_proj(x);
        let mut h = vec![0.0; self.layout.h];
        let mut input = self.vocab.bos();
        let mut used = Vec::new();
        let mut tokens = Vec::new();
        let mut logp = 0.0;
        let mut ent = 0.0;
        let mut in_conduct = false;
        let mut conduct = Conduct::Neutral;
        loop {
            let allowed = self.allowed(act_mask, &used, in_conduct);
            let (hn, z) = self.step(&h, input, &xp);
            let probs = masked_softmax(&z, &allowed);
            let tok = match mode {
                DecodeMode::Greedy => {
                    let mut best = 0;
                    for (i, p) in probs.iter().enumerate() {
                        if allowed[i] && (!allowed[best] || *p > probs[best]) {
                            best = i;
                        }
                    }
                    best
                }
                DecodeMode::Sample => {
                    let u: f64 = rng.gen();
                    let mut acc = 0.0;
                    let mut pick = None;
                    for (i, p) in probs.iter().enumerate() {
                        if allowed[i] {
                            acc += p;
                            pick = Some(i);
                            if u < acc {
                                break;
                            }
                        }
                    }
                    pick.expect("some token is always allowed")
                }
            };
            logp += probs[tok].ln();
            ent += entropy(&probs);
            tokens.push(tok);
            h = hn;
            input = tok;
            if in_conduct {
                if let Token::Conduct(c) = self.vocab.token(tok) {
                    conduct = *c;
                }
                break;
            }
            if tok == self.vocab.stop() {
                if !self.config.conduct {
                    break;
                }
                in_conduct = true;
            } else {
                used.push(tok);
            }
        }
        Decision {
            acts: used.iter().map(|i| self.vocab.act(*i).expect("act token").clone()).collect(),
            conduct,
            tokens,
            logp,
            value: self.value(x),
            entropy: ent,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acts::Intent;

    pub(crate) fn toy(hidden: usize, f: usize, conduct: bool) -> PolicyModel {
        let vocab = Vocabulary::from_acts(vec![
            ActTriple::new(Intent::Inform, "hotel", Some("phone")),
            ActTriple::new(Intent::NoOffer, "hotel", None),
        ]);
        let cfg = PolicyConfig { hidden, embed: 2, value_hidden: 2, max_acts: 2, conduct, seed: 3, ..PolicyConfig::default() };
        let mut m = PolicyModel::new(cfg, vocab, f).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for p in &mut m.params {
            *p = rng.gen_range(-0.8..0.8);
        }
        m
    }

    #[test]
    fn distributions_are_normalized_and_masked() {
        let m = toy(4, 3, true);
        let x = [0.5, -1.0, 1.0];
        let tr = m.trace(&x, &[true, false], &[0, 2, 3 + 2]);
        for t in 0..3 {
            let s: f64 = tr.probs(t).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
        assert_eq!(tr.probs(0)[1], 0.0);
        assert_eq!(tr.probs(1)[0], 0.0);
        assert!(tr.probs(2)[..3].iter().all(|p| *p == 0.0));
    }

    #[test]
    fn greedy_is_deterministic_and_well_formed() {
        let m = toy(4, 3, true);
        let x = [0.2, 0.1, -0.3];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = m.decide(&x, &[true, true], DecodeMode::Greedy, &mut rng);
        let b = m.decide(&x, &[true, true], DecodeMode::Greedy, &mut rng);
        assert_eq!(a, b);
        let tr = m.trace(&x, &[true, true], &a.tokens);
        assert!((tr.logp() - a.logp).abs() < 1e-12);
    }

    #[test]
    fn conduct_token_once_after_stop() {
        let m = toy(4, 3, true);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for i in 0..10_000 {
            let x = [(i % 7) as f64 / 7.0, 0.5, -0.5];
            let d = m.decide(&x, &[true, true], DecodeMode::Sample, &mut rng);
            let stop_at = d.tokens.iter().position(|t| *t == m.vocab.stop()).unwrap();
            assert_eq!(stop_at + 2, d.tokens.len());
            assert!(d.acts.len() <= m.config.max_acts);
            let conducts = d.tokens.iter().filter(|t| **t > m.vocab.stop()).count();
            assert_eq!(conducts, 1);
            let mut seen = d.tokens[..stop_at].to_vec();
            seen.dedup();
            assert_eq!(seen.len(), stop_at);
        }
    }

    #[test]
    fn disabled_conduct_is_neutral_and_free() {
        let m = toy(4, 3, false);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let d = m.decide(&[0.1, 0.2, 0.3], &[true, true], DecodeMode::Sample, &mut rng);
            assert_eq!(d.conduct, Conduct::Neutral);
            assert_eq!(*d.tokens.last().unwrap(), m.vocab.stop());
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let m = toy(3, 2, true);
        let x = [0.7, -0.4];
        let targets = [1, 0, 2, 4];
        let mask = [true, true];
        let (a, c) = (1.3, 0.25);
        let obj = |m: &PolicyModel| {
            let tr = m.trace(&x, &mask, &targets);
            a * tr.logp() + c * tr.entropy() + 0.6 * m.value(&x)
        };
        let mut grad = vec![0.0; m.n_params()];
        let tr = m.trace(&x, &mask, &targets);
        m.backward(&x, &tr, a, c, &mut grad);
        m.value_backward(&x, 0.6, &mut grad);
        let eps = 1e-6;
        let mut worst: f64 = 0.0;
        for i in 0..m.n_params() {
            let mut up = m.clone();
            up.params[i] += eps;
            let mut dn = m.clone();
            dn.params[i] -= eps;
            let fd = (obj(&up) - obj(&dn)) / (2.0 * eps);
            let err = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-6);
            worst = worst.max(err);
        }
        assert!(worst < 1e-4, "max relative error {worst}");
    }
}
