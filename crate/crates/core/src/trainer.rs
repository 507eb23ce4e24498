//! Closed-loop rollouts (policy, generation, simulated user, recognition,
//! tracking, reward) and the PPO training schedule.

use std::path::Path;
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::acts::{ActTriple, Intent};
use crate::episode::{judge_outcome, EpisodeMeta, EpisodeRecord, Outcome, SystemTurn, Turn};
use crate::error::{Error, Result};
use crate::eval::{self, MetricReport};
use crate::goal::{sample_goal, GoalConfig, UserGoal};
use crate::labels::Conduct;
use crate::lexicon::CueLexicon;
use crate::nlg::TemplateBank;
use crate::ontology::Ontology;
use crate::policy::{
    act_mask, clone_behavior, expert_acts, feature_dim, featurize, lexicalize, update, Adam, BcConfig, BcExample,
    Checkpoint, DecodeMode, PolicyConfig, PolicyModel, PpoConfig, Step, Trajectory, UpdateStats, Vocabulary,
};
use crate::reward::{total_reward, RewardConfig, TurnOutcome};
use crate::understanding::{track, DialogueState, EmotionRecognizer, RecognizerConfig};
use crate::usersim::{sample_persona, Categorical, Persona, PersonaConfig, UserSimulator};

/// Conduct proportions of the annotated system turns of the human-human corpus.
pub const CORPUS_CONDUCT_MARGINAL: [(Conduct, f64); 5] = [
    (Conduct::Neutral, 0.730),
    (Conduct::Appreciative, 0.136),
    (Conduct::Enthusiastic, 0.089),
    (Conduct::Apologetic, 0.043),
    (Conduct::Compassionate, 0.002),
];

/// Which emotion components are active. All off is the emotion-blind baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Ablation {
    pub emotion_state: bool,
    pub conduct_output: bool,
    pub emotion_reward: bool,
}

impl Default for Ablation {
    fn default() -> Self {
        Self::full()
    }
}

impl Ablation {
    pub fn full() -> Self {
        Self { emotion_state: true, conduct_output: true, emotion_reward: true }
    }

    pub fn none() -> Self {
        Self { emotion_state: false, conduct_output: false, emotion_reward: false }
    }

    /// Parses a comma list of components to switch off:
    /// `state`, `conduct`, `reward`, or `all`; `none` or an empty string keeps everything.
    pub fn disabling(spec: &str) -> Result<Self> {
        let mut a = Self::full();
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "state" => a.emotion_state = false,
                "conduct" => a.conduct_output = false,
                "reward" => a.emotion_reward = false,
                "all" => a = Self::none(),
                "none" => {}
                other => return Err(Error::Config(format!("unknown ablation component {other:?}"))),
            }
        }
        Ok(a)
    }
}

/// Supervised warm start on a noisy scripted expert.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PretrainConfig {
    /// Expert dialogues collected for cloning; 0 skips the warm start.
    pub dialogues: usize,
    /// Probability that an expert decision is replaced by one random feasible act.
    pub expert_noise: f64,
    pub conduct: Categorical<Conduct>,
    pub bc: BcConfig,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            dialogues: 40,
            expert_noise: 0.8,
            conduct: Categorical(CORPUS_CONDUCT_MARGINAL.to_vec()),
            bc: BcConfig { epochs: 3, ..BcConfig::default() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub total_dialogues: usize,
    pub eval_interval: usize,
    pub eval_dialogues: usize,
    /// Dialogues run with the best checkpoint after training; 0 skips them.
    pub final_eval_dialogues: usize,
    pub seeds: Vec<u64>,
    pub max_turns: usize,
    /// Rollout threads; 0 uses every core.
    pub workers: usize,
    pub batch_size: usize,
    /// Decoding used for evaluation dialogues.
    pub eval_decoding: DecodeMode,
    pub reward: RewardConfig,
    pub ablation: Ablation,
    pub policy: PolicyConfig,
    pub ppo: PpoConfig,
    pub pretrain: PretrainConfig,
    pub goals: GoalConfig,
    pub persona: PersonaConfig,
    pub recognizer: RecognizerConfig,
    /// Largest tolerated share of aborted training episodes.
    pub max_abort_rate: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            total_dialogues: 3000,
            eval_interval: 500,
            eval_dialogues: 300,
            final_eval_dialogues: 500,
            seeds: vec![0, 1, 2],
            max_turns: 20,
            workers: 0,
            batch_size: 16,
            eval_decoding: DecodeMode::Greedy,
            reward: RewardConfig::default(),
            ablation: Ablation::full(),
            policy: PolicyConfig::default(),
            ppo: PpoConfig { reward_scale: 0.05, ..PpoConfig::default() },
            pretrain: PretrainConfig::default(),
            goals: GoalConfig::default(),
            persona: PersonaConfig::default(),
            recognizer: RecognizerConfig::default(),
            max_abort_rate: 0.01,
        }
    }
}

impl TrainConfig {
    /// 15k dialogues, evaluation every 1k on 500 dialogues, six seeds.
    pub fn full_scale() -> Self {
        Self {
            total_dialogues: 15_000,
            eval_interval: 1000,
            eval_dialogues: 500,
            seeds: (0..6).collect(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.eval_interval == 0 || !self.total_dialogues.is_multiple_of(self.eval_interval) {
            return Err(Error::Config(format!(
                "eval interval {} must divide the total {}",
                self.eval_interval, self.total_dialogues
            )));
        }
        if self.max_turns < 2 {
            return Err(Error::Config("max_turns must be at least 2".into()));
        }
        if self.batch_size == 0 || self.eval_dialogues == 0 {
            return Err(Error::Config("batch size and eval dialogues must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.pretrain.expert_noise) {
            return Err(Error::Config("expert_noise must lie in [0, 1]".into()));
        }
        self.pretrain.conduct.validate("pretrain conduct")?;
        self.reward.validate()?;
        self.goals.validate()?;
        self.persona.validate()?;
        self.policy.validate()
    }

    /// Reward actually paid: the emotion term vanishes when it is ablated.
    pub fn effective_reward(&self) -> RewardConfig {
        if self.ablation.emotion_reward {
            self.reward.clone()
        } else {
            self.reward.clone().with_beta(0.0)
        }
    }

    pub fn effective_policy(&self, seed: u64) -> PolicyConfig {
        PolicyConfig {
            emotion_features: self.ablation.emotion_state,
            conduct: self.ablation.conduct_output,
            seed,
            ..self.policy.clone()
        }
    }

    /// Hex SHA-256 of the canonical JSON of the config and seed.
    pub fn hash(&self, seed: u64) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(self).expect("config serializes"));
        h.update(seed.to_le_bytes());
        hex::encode(h.finalize())
    }
}

/// Everything an episode needs besides the system agent.
#[derive(Debug, Clone)]
pub struct Modules {
    pub ontology: Arc<Ontology>,
    pub nlg: TemplateBank,
    pub simulator: UserSimulator,
    pub recognizer: EmotionRecognizer,
}

impl Modules {
    pub fn new(ontology: Arc<Ontology>, recognizer: RecognizerConfig) -> Self {
        Self {
            nlg: TemplateBank::default(),
            simulator: UserSimulator::with_defaults(ontology.clone()),
            recognizer: EmotionRecognizer::new(CueLexicon::default(), recognizer),
            ontology,
        }
    }

    pub fn desk() -> Self {
        Self::new(Arc::new(Ontology::desk()), RecognizerConfig::default())
    }
}

/// Output of a system agent for one turn.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentDecision {
    pub acts: Vec<ActTriple>,
    pub conduct: Conduct,
    /// Learning data, present for trainable policies.
    pub step: Option<Step>,
}

pub trait Agent: Sync {
    fn decide(&self, state: &DialogueState, ontology: &Ontology, rng: &mut ChaCha8Rng) -> AgentDecision;
}

/// A policy network used as the system agent.
#[derive(Debug, Clone, Copy)]
pub struct PolicyAgent<'a> {
    pub model: &'a PolicyModel,
    pub mode: DecodeMode,
}

impl Agent for PolicyAgent<'_> {
    fn decide(&self, state: &DialogueState, ontology: &Ontology, rng: &mut ChaCha8Rng) -> AgentDecision {
        let features = featurize(state, ontology, self.model.config.emotion_features);
        let mask = act_mask(&self.model.vocab, state, ontology);
        let d = self.model.decide(&features, &mask, self.mode, rng);
        AgentDecision {
            acts: d.acts,
            conduct: d.conduct,
            step: Some(Step { features, act_mask: mask, tokens: d.tokens, logp: d.logp, value: d.value, reward: 0.0 }),
        }
    }
}

/// Scripted expert that sometimes blunders, with conduct drawn from a fixed marginal.
/// Each decision is recorded as a cloning example.
#[derive(Debug)]
pub struct NoisyExpert<'a> {
    pub vocab: &'a Vocabulary,
    pub noise: f64,
    pub conduct: &'a Categorical<Conduct>,
    pub emotion_features: bool,
    pub log: Mutex<Vec<BcExample>>,
}

impl Agent for NoisyExpert<'_> {
    fn decide(&self, state: &DialogueState, ontology: &Ontology, rng: &mut ChaCha8Rng) -> AgentDecision {
        let mask = act_mask(self.vocab, state, ontology);
        let mut acts = expert_acts(state, ontology);
        if rng.gen::<f64>() < self.noise {
            let feasible: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
            if !feasible.is_empty() {
                let pick = feasible[rng.gen_range(0..feasible.len())];
                acts = vec![self.vocab.act(pick).expect("act index").clone()];
            }
        }
        acts.retain(|a| self.vocab.act_index(a).map(|i| mask[i]).unwrap_or(false));
        let conduct = self.conduct.sample(rng);
        self.log.lock().expect("expert log").push(BcExample {
            features: featurize(state, ontology, self.emotion_features),
            acts: acts.clone(),
            conduct,
            act_mask: Some(mask),
        });
        AgentDecision { acts, conduct, step: None }
    }
}

/// Rollout settings shared by every episode of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeConfig {
    pub max_turns: usize,
    pub reward: RewardConfig,
    pub meta: EpisodeMeta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRun {
    pub record: EpisodeRecord,
    pub trajectory: Trajectory,
    /// Why the episode aborted, if it did.
    pub error: Option<String>,
}

/// SplitMix64 finalizer used to derive independent sub-seeds.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const USER_STREAM: u64 = 1;
const ERC_STREAM: u64 = 2;
const NLG_STREAM: u64 = 3;
const AGENT_STREAM: u64 = 4;
const SCENARIO_STREAM: u64 = 5;

/// Goal and persona for an episode seed.
pub fn scenario(modules: &Modules, goals: &GoalConfig, personas: &PersonaConfig, seed: u64) -> Result<(UserGoal, Persona)> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, SCENARIO_STREAM));
    let goal = sample_goal(&modules.ontology, &mut rng, goals)?;
    let persona = sample_persona(personas, &goal.domain_order(), &mut rng)?;
    Ok((goal, persona))
}

/// Plays one dialogue. Module failures end the episode early and mark it aborted.
pub fn run_episode(
    agent: &dyn Agent,
    modules: &Modules,
    goal: &UserGoal,
    persona: &Persona,
    seed: u64,
    cfg: &EpisodeConfig,
) -> EpisodeRun {
    let mut turns = Vec::new();
    let mut steps = Vec::new();
    let played = play(agent, modules, goal, persona, seed, cfg, &mut turns, &mut steps);
    let episode_return: f64 = turns.iter().filter_map(|t| t.reward.map(|r| r.total)).sum();
    let (outcome, error) = match played {
        Ok(v) => (Outcome { success: v.success, inform: v.inform, episode_return, aborted: false }, None),
        Err(e) => (Outcome { success: false, inform: false, episode_return, aborted: true }, Some(e.to_string())),
    };
    EpisodeRun {
        record: EpisodeRecord { goal: goal.clone(), turns, outcome, seed, metadata: cfg.meta.clone() },
        trajectory: Trajectory { steps, episode_return },
        error,
    }
}

#[allow(clippy::too_many_arguments)]
fn play(
    agent: &dyn Agent,
    modules: &Modules,
    goal: &UserGoal,
    persona: &Persona,
    seed: u64,
    cfg: &EpisodeConfig,
    turns: &mut Vec<Turn>,
    steps: &mut Vec<Step>,
) -> Result<crate::episode::Verdict> {
    let ont = &*modules.ontology;
    let mut erc_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, ERC_STREAM));
    let mut nlg_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, NLG_STREAM));
    let mut agent_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, AGENT_STREAM));

    let mut user = modules.simulator.init_session(goal, persona, derive_seed(seed, USER_STREAM))?;
    let mut reply = modules.simulator.opening(&mut user)?;
    let mut state = DialogueState::new(ont);
    let mut awaiting_reward = false;
    let mut system_closed = false;
    for t in 0..cfg.max_turns {
        let history: Vec<String> = state.history.iter().cloned().collect();
        let (perceived, _) = modules.recognizer.recognize(&reply.utterance, &history, &state, &mut erc_rng);
        state = track(&state, &reply.acts, ont)?;
        state.perceived_emotion = perceived;
        state.remember(&reply.utterance);
        turns.push(Turn {
            index: t,
            user_utterance: reply.utterance.clone(),
            user_acts: reply.acts.clone(),
            true_emotion: reply.emotion,
            perceived_emotion: perceived,
            reward: None,
            system: None,
        });

        let user_bye = reply.acts.iter().any(|a| a.intent == Intent::Bye);
        let terminal = user_bye || system_closed || t + 1 == cfg.max_turns;
        let verdict = terminal.then(|| judge_outcome(ont, goal, turns));
        if awaiting_reward {
            let outcome = match verdict {
                None => TurnOutcome::Ongoing,
                Some(v) if v.success => TurnOutcome::Success,
                Some(_) => TurnOutcome::Failure,
            };
            let r = total_reward(outcome, perceived, &cfg.reward);
            turns[t].reward = Some(r);
            if let Some(s) = steps.last_mut() {
                s.reward = r.total;
            }
        }
        if let Some(v) = verdict {
            return Ok(v);
        }

        let decision = agent.decide(&state, ont, &mut agent_rng);
        let acts = lexicalize(&decision.acts, &state, ont);
        let conduct = TemplateBank::expressed(decision.conduct, &acts);
        let utterance = modules.nlg.realize(&acts, conduct, &mut nlg_rng)?;
        state.record_system_acts(&acts, ont);
        system_closed = acts.iter().any(|a| a.intent == Intent::Bye);
        turns[t].system = Some(SystemTurn { acts: acts.clone(), conduct, utterance: utterance.clone() });
        if let Some(step) = decision.step {
            steps.push(step);
        }
        awaiting_reward = true;
        reply = modules.simulator.respond(&mut user, &acts, conduct, &utterance)?;
    }
    unreachable!("the last turn is always terminal")
}

/// One row of the learning curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub dialogues: usize,
    pub success_rate: f64,
    pub inform_rate: f64,
    pub mean_sentiment: f64,
    pub mean_return: f64,
    pub hallucination_rate: f64,
    pub mean_turns: f64,
}

impl CurvePoint {
    fn of(dialogues: usize, r: &MetricReport) -> Self {
        Self {
            dialogues,
            success_rate: r.success_rate,
            inform_rate: r.inform_rate,
            mean_sentiment: r.mean_sentiment,
            mean_return: r.mean_return,
            hallucination_rate: r.hallucination_rate,
            mean_turns: r.mean_turns,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutput {
    pub seed: u64,
    pub config_hash: String,
    pub pretrain_loss: Vec<f64>,
    pub curves: Vec<CurvePoint>,
    pub checkpoints: Vec<Checkpoint>,
    /// Index into `curves` and `checkpoints` of the highest mean return.
    pub best: usize,
    pub updates: Vec<UpdateStats>,
    pub aborted: usize,
    /// Episodes of the best checkpoint on the final evaluation set.
    pub final_episodes: Vec<EpisodeRecord>,
}

impl TrainOutput {
    pub fn best_model(&self, ontology: &Ontology) -> Result<PolicyModel> {
        self.checkpoints[self.best].restore(Vocabulary::from_ontology(ontology))
    }
}

const TRAIN_TAG: u64 = 0x7472_6169_6e00_0000;
const EVAL_TAG: u64 = 0x6576_616c_0000_0000;
const FINAL_TAG: u64 = 0x6669_6e61_6c00_0000;
const PRETRAIN_TAG: u64 = 0x7072_6574_7200_0000;

fn episode_seed(run_seed: u64, tag: u64, i: usize) -> u64 {
    derive_seed(derive_seed(run_seed, tag), i as u64)
}

fn in_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("rollout pool: {e}")))?;
    Ok(pool.install(f))
}

/// Plays `seeds` in parallel, returning runs in seed order.
pub fn rollouts(
    agent: &dyn Agent,
    modules: &Modules,
    config: &TrainConfig,
    seeds: &[u64],
    meta: &EpisodeMeta,
) -> Result<Vec<EpisodeRun>> {
    let cfg = EpisodeConfig { max_turns: config.max_turns, reward: config.effective_reward(), meta: meta.clone() };
    seeds
        .par_iter()
        .map(|&s| {
            let (goal, persona) = scenario(modules, &config.goals, &config.persona, s)?;
            Ok(run_episode(agent, modules, &goal, &persona, s, &cfg))
        })
        .collect()
}

/// Greedy evaluation of a frozen policy on `n` dialogues drawn from `tag`.
pub fn evaluate_policy(
    model: &PolicyModel,
    modules: &Modules,
    config: &TrainConfig,
    run_seed: u64,
    n: usize,
    meta: &EpisodeMeta,
) -> Result<Vec<EpisodeRecord>> {
    let seeds: Vec<u64> = (0..n).map(|i| episode_seed(run_seed, EVAL_TAG, i)).collect();
    evaluate_on(model, modules, config, &seeds, meta)
}

fn evaluate_on(
    model: &PolicyModel,
    modules: &Modules,
    config: &TrainConfig,
    seeds: &[u64],
    meta: &EpisodeMeta,
) -> Result<Vec<EpisodeRecord>> {
    let agent = PolicyAgent { model, mode: config.eval_decoding };
    Ok(rollouts(&agent, modules, config, seeds, meta)?.into_iter().map(|r| r.record).collect())
}

/// Cloning corpus from noisy-expert dialogues.
pub fn expert_corpus(modules: &Modules, config: &TrainConfig, run_seed: u64, vocab: &Vocabulary) -> Result<Vec<BcExample>> {
    let cfg = EpisodeConfig { max_turns: config.max_turns, reward: config.effective_reward(), meta: EpisodeMeta::default() };
    let runs: Vec<Vec<BcExample>> = (0..config.pretrain.dialogues)
        .into_par_iter()
        .map(|i| {
            let s = episode_seed(run_seed, PRETRAIN_TAG, i);
            let (goal, persona) = scenario(modules, &config.goals, &config.persona, s)?;
            let expert = NoisyExpert {
                vocab,
                noise: config.pretrain.expert_noise,
                conduct: &config.pretrain.conduct,
                emotion_features: config.ablation.emotion_state,
                log: Mutex::new(Vec::new()),
            };
            run_episode(&expert, modules, &goal, &persona, s, &cfg);
            Ok(expert.log.into_inner().expect("expert log"))
        })
        .collect::<Result<_>>()?;
    Ok(runs.into_iter().flatten().collect())
}

/// Trains one seed: optional cloning warm start, then PPO with periodic greedy
/// evaluation. When `out_dir` is given, curves, checkpoints and the final
/// evaluation episodes are written there.
pub fn train(config: &TrainConfig, seed: u64, modules: &Modules, out_dir: Option<&Path>) -> Result<TrainOutput> {
    config.validate()?;
    in_pool(config.workers, || train_inner(config, seed, modules, out_dir))?
}

fn train_inner(config: &TrainConfig, seed: u64, modules: &Modules, out_dir: Option<&Path>) -> Result<TrainOutput> {
    let ont = &*modules.ontology;
    let hash = config.hash(seed);
    let vocab = Vocabulary::from_ontology(ont);
    let mut model = PolicyModel::new(config.effective_policy(seed), vocab.clone(), feature_dim(ont))?;

    let mut pretrain_loss = Vec::new();
    if config.pretrain.dialogues > 0 {
        let corpus = expert_corpus(modules, config, seed, &vocab)?;
        let bc = BcConfig { seed: derive_seed(seed, PRETRAIN_TAG), ..config.pretrain.bc.clone() };
        pretrain_loss = clone_behavior(&mut model, &corpus, &bc)?;
    }

    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir.join("checkpoints"))?;
    }
    let mut opt = Adam::new(model.n_params(), config.ppo.lr);
    let mut update_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x7570_6400));
    let mut curves = Vec::new();
    let mut checkpoints = Vec::new();
    let mut updates = Vec::new();
    let mut aborted = 0usize;
    let mut done = 0usize;
    while done < config.total_dialogues {
        let next_eval = (done / config.eval_interval + 1) * config.eval_interval;
        let n = config.batch_size.min(next_eval - done);
        let seeds: Vec<u64> = (done..done + n).map(|i| episode_seed(seed, TRAIN_TAG, i)).collect();
        let meta = EpisodeMeta { checkpoint: format!("train@{done}"), config_hash: hash.clone() };
        let runs = rollouts(&PolicyAgent { model: &model, mode: DecodeMode::Sample }, modules, config, &seeds, &meta)?;
        let batch: Vec<Trajectory> = runs
            .into_iter()
            .filter_map(|r| if r.record.outcome.aborted { aborted += 1; None } else { Some(r.trajectory) })
            .filter(|t| !t.steps.is_empty())
            .collect();
        done += n;
        if aborted as f64 > config.max_abort_rate * done.max(100) as f64 {
            return Err(Error::Precondition(format!("{aborted} of {done} training episodes aborted")));
        }
        if !batch.is_empty() {
            match update(&mut model, &mut opt, &batch, &config.ppo, &mut update_rng) {
                Ok(s) => updates.push(s),
                Err(e) => {
                    if let Some(dir) = out_dir {
                        let dump = serde_json::json!({
                            "error": e.to_string(),
                            "dialogues": done,
                            "last_updates": updates.iter().rev().take(5).collect::<Vec<_>>(),
                            "batch_returns": batch.iter().map(|t| t.episode_return).collect::<Vec<_>>(),
                        });
                        std::fs::write(dir.join("diagnostic.json"), serde_json::to_vec_pretty(&dump)?)?;
                    }
                    return Err(e);
                }
            }
        }
        if done == next_eval {
            let meta = EpisodeMeta { checkpoint: format!("ckpt_{done}"), config_hash: hash.clone() };
            let episodes = evaluate_policy(&model, modules, config, seed, config.eval_dialogues, &meta)?;
            let report = eval::report(&episodes, ont, &hash)?;
            curves.push(CurvePoint::of(done, &report));
            let ck = Checkpoint::of(&model, &hash, done);
            if let Some(dir) = out_dir {
                ck.save(dir.join("checkpoints").join(format!("ckpt_{done}.json")))?;
            }
            checkpoints.push(ck);
        }
    }

    let best = curves
        .iter()
        .enumerate()
        .fold(0, |b, (i, c)| if c.mean_return > curves[b].mean_return { i } else { b });
    let mut final_episodes = Vec::new();
    if config.final_eval_dialogues > 0 {
        let best_model = checkpoints[best].restore(vocab)?;
        let seeds: Vec<u64> = (0..config.final_eval_dialogues).map(|i| episode_seed(seed, FINAL_TAG, i)).collect();
        let meta = EpisodeMeta { checkpoint: format!("ckpt_{}", checkpoints[best].dialogues), config_hash: hash.clone() };
        final_episodes = evaluate_on(&best_model, modules, config, &seeds, &meta)?;
    }

    let out = TrainOutput { seed, config_hash: hash, pretrain_loss, curves, checkpoints, best, updates, aborted, final_episodes };
    if let Some(dir) = out_dir {
        write_outputs(&out, dir)?;
    }
    Ok(out)
}

/// Writes `curves.json`, `best.json` and `episodes.jsonl`.
pub fn write_outputs(out: &TrainOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("curves.json"), serde_json::to_vec_pretty(&out.curves)?)?;
    let best = serde_json::json!({
        "seed": out.seed,
        "config_hash": out.config_hash,
        "checkpoint": format!("checkpoints/ckpt_{}.json", out.checkpoints[out.best].dialogues),
        "dialogues": out.checkpoints[out.best].dialogues,
        "mean_return": out.curves[out.best].mean_return,
        "aborted_training_episodes": out.aborted,
    });
    std::fs::write(dir.join("best.json"), serde_json::to_vec_pretty(&best)?)?;
    let mut lines = Vec::new();
    for e in &out.final_episodes {
        lines.extend(serde_json::to_vec(e)?);
        lines.push(b'\n');
    }
    std::fs::write(dir.join("episodes.jsonl"), lines)?;
    Ok(())
}

/// Reads one record per line.
pub fn read_episodes(path: impl AsRef<Path>) -> Result<Vec<EpisodeRecord>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}
