//! Human trial sessions: a keyword act parser, the turn loop against a frozen
//! policy, append-only persistence, ratings and quality filtering.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acts::{ActTriple, Intent, SemanticAct, GENERAL_DOMAIN};
use crate::error::{Error, Result};
use crate::goal::{sample_goal, GoalConfig, UserGoal};
use crate::labels::{Conduct, UserEmotion};
use crate::lexicon::CueLexicon;
use crate::nlg::TemplateBank;
use crate::ontology::Ontology;
use crate::policy::{act_mask, expert_acts, featurize, lexicalize, DecodeMode, PolicyModel};
use crate::text::{contains_bounded, normalize, tokens};
use crate::trainer::derive_seed;
use crate::understanding::{track, DialogueState, EmotionRecognizer};

const DOMAIN_WORDS: &[(&str, &[&str])] = &[
    ("restaurant", &["restaurant", "food", "eat", "dinner", "lunch"]),
    ("hotel", &["hotel", "stay", "room", "accommodation"]),
    ("attraction", &["attraction", "visit", "sightseeing"]),
];

const REQUEST_WORDS: &[(&str, &[&str])] = &[
    ("phone", &["phone", "number", "telephone"]),
    ("address", &["address", "where is", "located"]),
    ("postcode", &["postcode", "post code", "zip"]),
];

const BYE_WORDS: &[&str] = &["bye", "goodbye", "that is all", "that's all", "nothing else"];

const NUMBER_WORDS: &[(&str, &str)] = &[
    ("one", "1"),
    ("two", "2"),
    ("three", "3"),
    ("four", "4"),
    ("five", "5"),
    ("six", "6"),
    ("seven", "7"),
    ("eight", "8"),
];

/// Keyword and synonym parser from free text to user acts.
///
/// Only values spelled as in the ontology are recognized; star ratings need
/// the word "star" after the value, party sizes need "people", "persons" or
/// "guests".
#[derive(Debug, Clone)]
pub struct ActParser {
    ontology: Arc<Ontology>,
}

impl ActParser {
    pub fn new(ontology: Arc<Ontology>) -> Self {
        Self { ontology }
    }

    fn mentioned_domain(&self, text: &str) -> Option<String> {
        let mut best: Option<(usize, String)> = None;
        for d in &self.ontology.domains {
            let mut words: Vec<&str> = vec![d.name.as_str()];
            if let Some((_, extra)) = DOMAIN_WORDS.iter().find(|(n, _)| *n == d.name) {
                words.extend(extra.iter());
            }
            for w in words {
                if let Some(&pos) = crate::text::find_bounded(text, w).first() {
                    if best.as_ref().is_none_or(|(p, _)| pos < *p) {
                        best = Some((pos, d.name.clone()));
                    }
                }
            }
        }
        best.map(|(_, d)| d)
    }

    /// Domain whose constraint values alone explain the text, if exactly one does.
    fn domain_from_values(&self, text: &str) -> Option<String> {
        let hits: Vec<&str> = self
            .ontology
            .domains
            .iter()
            .filter(|d| {
                d.constraint_slots().any(|s| {
                    d.informable[s].iter().any(|v| {
                        contains_bounded(text, v)
                            && !self.ontology.domains.iter().any(|o| o.name != d.name && o.informable.values().flatten().any(|x| x == v))
                    })
                })
            })
            .map(|d| d.name.as_str())
            .collect();
        (hits.len() == 1).then(|| hits[0].to_owned())
    }

    pub fn parse(&self, text: &str, state: &DialogueState) -> Vec<SemanticAct> {
        let text = normalize(text);
        let mut acts = Vec::new();
        let domain = self
            .mentioned_domain(&text)
            .or_else(|| self.domain_from_values(&text))
            .or_else(|| state.active_domain.clone());
        if let Some(schema) = domain.as_deref().and_then(|d| self.ontology.domain(d)) {
            let d = schema.name.as_str();
            for slot in schema.constraint_slots() {
                for v in &schema.informable[slot] {
                    let hit = if slot == "stars" {
                        contains_bounded(&text, &format!("{v} star")) || contains_bounded(&text, &format!("{v} stars"))
                    } else {
                        contains_bounded(&text, v)
                    };
                    if hit {
                        acts.push(SemanticAct::inform(d, slot, v));
                        break;
                    }
                }
            }
            if let Some(days) = schema.book_slots.get("day") {
                if let Some(v) = days.iter().find(|v| contains_bounded(&text, v)) {
                    acts.push(SemanticAct::inform(d, "day", v));
                }
            }
            if let Some(sizes) = schema.book_slots.get("people") {
                let words = tokens(&text);
                for w in words.windows(2) {
                    if !matches!(w[1], "people" | "persons" | "person" | "guests") {
                        continue;
                    }
                    let n = NUMBER_WORDS.iter().find(|(k, _)| *k == w[0]).map(|(_, n)| *n).unwrap_or(w[0]);
                    if sizes.iter().any(|s| s == n) {
                        acts.push(SemanticAct::inform(d, "people", n));
                        break;
                    }
                }
            }
            for (slot, words) in REQUEST_WORDS {
                if schema.is_requestable(slot) && words.iter().any(|w| contains_bounded(&text, w)) {
                    acts.push(SemanticAct::request(d, slot));
                }
            }
        }
        if BYE_WORDS.iter().any(|w| contains_bounded(&text, w)) {
            acts.push(SemanticAct::bye());
        }
        acts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Emotional,
    Baseline,
}

/// A frozen system stack a session talks to.
#[derive(Debug, Clone)]
pub enum Stack {
    Policy(Arc<PolicyModel>),
    /// The scripted task policy, always neutral.
    Expert,
}

pub const EXPERT_CHECKPOINT: &str = "expert";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rating {
    pub success: bool,
    /// 1 very negative to 5 very positive.
    pub sentiment: u8,
}

impl Rating {
    /// Rating mapped onto [-1, 1].
    pub fn valence(&self) -> f64 {
        (f64::from(self.sentiment) - 3.0) / 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialTurn {
    pub index: usize,
    pub user_text: String,
    pub user_acts: Vec<SemanticAct>,
    pub perceived_emotion: UserEmotion,
    pub system_acts: Vec<SemanticAct>,
    pub conduct: Conduct,
    pub system_text: String,
    /// The user text was not understood and the state was left unchanged.
    #[serde(default)]
    pub clarification: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSession {
    pub id: String,
    pub variant: Variant,
    pub checkpoint: String,
    pub seed: u64,
    pub goal: UserGoal,
    pub goal_text: String,
    pub turns: Vec<TrialTurn>,
    pub rating: Option<Rating>,
    pub closed: bool,
}

/// One line of a session log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "lowercase")]
enum LogEvent {
    Created {
        id: String,
        variant: Variant,
        checkpoint: String,
        seed: u64,
        goal: UserGoal,
        goal_text: String,
    },
    Turn(TrialTurn),
    Closed,
    Rating(Rating),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrialConfig {
    pub max_turns: usize,
    pub goals: GoalConfig,
    pub quality: QualityRules,
}

impl Default for TrialConfig {
    fn default() -> Self {
        Self { max_turns: 20, goals: GoalConfig::default(), quality: QualityRules::default() }
    }
}

pub const CLARIFICATION: &str =
    "Sorry, I did not understand that. Could you rephrase it using the terms from your goal?";
pub const CLOSING: &str = "We have reached the end of this conversation. Thank you for taking part!";

struct Live {
    session: TrialSession,
    state: DialogueState,
}

/// Session store and turn loop for the human trial.
pub struct TrialService {
    dir: PathBuf,
    config: TrialConfig,
    ontology: Arc<Ontology>,
    parser: ActParser,
    nlg: TemplateBank,
    recognizer: EmotionRecognizer,
    stacks: BTreeMap<String, Stack>,
    sessions: Mutex<BTreeMap<String, Arc<Mutex<Live>>>>,
    index: Mutex<File>,
}

impl std::fmt::Debug for TrialService {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TrialService").field("dir", &self.dir).finish_non_exhaustive()
    }
}

fn append(path: &Path, line: &impl Serialize) -> Result<()> {
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    let mut bytes = serde_json::to_vec(line)?;
    bytes.push(b'\n');
    f.write_all(&bytes)?;
    f.sync_data()?;
    Ok(())
}

impl TrialService {
    /// Opens (or creates) a store in `dir` and reloads every persisted session.
    /// `stacks` maps checkpoint ids to systems; the scripted expert is always present.
    pub fn open(dir: impl Into<PathBuf>, ontology: Arc<Ontology>, mut stacks: BTreeMap<String, Stack>, config: TrialConfig) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(dir.join("sessions"))?;
        stacks.entry(EXPERT_CHECKPOINT.to_owned()).or_insert(Stack::Expert);
        let index = OpenOptions::new().create(true).append(true).open(dir.join("index.jsonl"))?;
        let svc = Self {
            parser: ActParser::new(ontology.clone()),
            nlg: TemplateBank::default(),
            recognizer: EmotionRecognizer::noiseless(CueLexicon::default()),
            dir,
            config,
            ontology,
            stacks,
            sessions: Mutex::new(BTreeMap::new()),
            index: Mutex::new(index),
        };
        let text = std::fs::read_to_string(svc.dir.join("index.jsonl"))?;
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let entry: IndexEntry = serde_json::from_str(line)?;
            let session = svc.load_log(&entry.id)?;
            let state = svc.rebuild_state(&session)?;
            svc.sessions
                .lock()
                .expect("sessions lock")
                .insert(session.id.clone(), Arc::new(Mutex::new(Live { session, state })));
        }
        Ok(svc)
    }

    fn log_path(&self, id: &str) -> PathBuf {
        self.dir.join("sessions").join(format!("{id}.jsonl"))
    }

    fn load_log(&self, id: &str) -> Result<TrialSession> {
        let text = std::fs::read_to_string(self.log_path(id))?;
        let mut session: Option<TrialSession> = None;
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            match serde_json::from_str::<LogEvent>(line)? {
                LogEvent::Created { id, variant, checkpoint, seed, goal, goal_text } => {
                    session = Some(TrialSession {
                        id,
                        variant,
                        checkpoint,
                        seed,
                        goal,
                        goal_text,
                        turns: Vec::new(),
                        rating: None,
                        closed: false,
                    });
                }
                ev => {
                    let s = session
                        .as_mut()
                        .ok_or_else(|| Error::Validation(format!("session log {id} does not start with its header")))?;
                    match ev {
                        LogEvent::Turn(t) => s.turns.push(t),
                        LogEvent::Closed => s.closed = true,
                        LogEvent::Rating(r) => {
                            s.rating = Some(r);
                            s.closed = true;
                        }
                        LogEvent::Created { .. } => unreachable!(),
                    }
                }
            }
        }
        session.ok_or_else(|| Error::Validation(format!("empty session log {id}")))
    }

    /// Tracker state after the user turns of a transcript.
    fn rebuild_state(&self, s: &TrialSession) -> Result<DialogueState> {
        let mut state = DialogueState::new(&self.ontology);
        for t in s.turns.iter().filter(|t| !t.clarification) {
            state = track(&state, &t.user_acts, &self.ontology)?;
            state.perceived_emotion = t.perceived_emotion;
            state.remember(&t.user_text);
            state.record_system_acts(&t.system_acts, &self.ontology);
        }
        Ok(state)
    }

    pub fn checkpoints(&self) -> Vec<String> {
        self.stacks.keys().cloned().collect()
    }

    /// Starts a session; the goal depends only on `seed`.
    pub fn create_session(&self, variant: Variant, checkpoint: &str, seed: Option<u64>) -> Result<TrialSession> {
        if !self.stacks.contains_key(checkpoint) {
            return Err(Error::NotFound(format!("checkpoint {checkpoint}")));
        }
        let mut sessions = self.sessions.lock().expect("sessions lock");
        let seed = seed.unwrap_or(sessions.len() as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let goal = sample_goal(&self.ontology, &mut rng, &self.config.goals)?;
        let session = TrialSession {
            id: uuid::Uuid::new_v4().to_string(),
            variant,
            checkpoint: checkpoint.to_owned(),
            seed,
            goal_text: goal.render_instructions(),
            goal,
            turns: Vec::new(),
            rating: None,
            closed: false,
        };
        append(
            &self.log_path(&session.id),
            &LogEvent::Created {
                id: session.id.clone(),
                variant,
                checkpoint: checkpoint.to_owned(),
                seed,
                goal: session.goal.clone(),
                goal_text: session.goal_text.clone(),
            },
        )?;
        {
            let mut index = self.index.lock().expect("index lock");
            let mut line = serde_json::to_vec(&IndexEntry { id: session.id.clone(), variant, checkpoint: checkpoint.to_owned() })?;
            line.push(b'\n');
            index.write_all(&line)?;
            index.sync_data()?;
        }
        let state = DialogueState::new(&self.ontology);
        sessions.insert(session.id.clone(), Arc::new(Mutex::new(Live { session: session.clone(), state })));
        Ok(session)
    }

    fn live(&self, id: &str) -> Result<Arc<Mutex<Live>>> {
        self.sessions
            .lock()
            .expect("sessions lock")
            .get(id)
            .cloned()
            .ok_or_else(|| Error::NotFound(format!("session {id}")))
    }

    pub fn session(&self, id: &str) -> Result<TrialSession> {
        Ok(self.live(id)?.lock().expect("session lock").session.clone())
    }

    pub fn sessions(&self) -> Vec<TrialSession> {
        let all: Vec<_> = self.sessions.lock().expect("sessions lock").values().cloned().collect();
        all.iter().map(|l| l.lock().expect("session lock").session.clone()).collect()
    }

    /// System side of one turn: decide, lexicalize and realize.
    fn respond(&self, s: &TrialSession, state: &DialogueState) -> Result<(Vec<SemanticAct>, Conduct, String)> {
        let stack = self
            .stacks
            .get(&s.checkpoint)
            .ok_or_else(|| Error::NotFound(format!("checkpoint {}", s.checkpoint)))?;
        let emotional = s.variant == Variant::Emotional;
        let (triples, conduct): (Vec<ActTriple>, Conduct) = match stack {
            Stack::Expert => (expert_acts(state, &self.ontology), Conduct::Neutral),
            Stack::Policy(model) => {
                let x = featurize(state, &self.ontology, emotional && model.config.emotion_features);
                let mask = act_mask(&model.vocab, state, &self.ontology);
                let mut rng = ChaCha8Rng::seed_from_u64(0);
                let d = model.decide(&x, &mask, DecodeMode::Greedy, &mut rng);
                (d.acts, if emotional { d.conduct } else { Conduct::Neutral })
            }
        };
        let acts = lexicalize(&triples, state, &self.ontology);
        let conduct = TemplateBank::expressed(conduct, &acts);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(s.seed, s.turns.len() as u64));
        let text = self.nlg.realize(&acts, conduct, &mut rng)?;
        Ok((acts, conduct, text))
    }

    /// Handles one user message. The turn is on disk before this returns.
    pub fn post_message(&self, id: &str, text: &str) -> Result<TrialTurn> {
        let live = self.live(id)?;
        let mut live = live.lock().expect("session lock");
        if live.session.closed {
            return Err(Error::Conflict(format!("session {id} is closed")));
        }
        let index = live.session.turns.len();
        let user_acts = self.parser.parse(text, &live.state);
        let history: Vec<String> = live.state.history.iter().cloned().collect();
        let perceived = self.recognizer.detect(text, &history, &live.state);
        let user_bye = user_acts.iter().any(|a| a.intent == Intent::Bye);

        let mut turn = TrialTurn {
            index,
            user_text: text.to_owned(),
            user_acts: user_acts.clone(),
            perceived_emotion: perceived,
            system_acts: Vec::new(),
            conduct: Conduct::Neutral,
            system_text: String::new(),
            clarification: false,
        };
        let mut next_state = None;
        if user_acts.is_empty() {
            turn.clarification = true;
            turn.system_text = CLARIFICATION.to_owned();
        } else if user_bye {
            turn.system_acts = vec![SemanticAct::bye()];
            turn.system_text = self.nlg.realize(&turn.system_acts, Conduct::Neutral, &mut ChaCha8Rng::seed_from_u64(0))?;
        } else {
            let mut state = track(&live.state, &user_acts, &self.ontology)?;
            state.perceived_emotion = perceived;
            state.remember(text);
            let (acts, conduct, utterance) = self.respond(&live.session, &state)?;
            state.record_system_acts(&acts, &self.ontology);
            turn.system_acts = acts;
            turn.conduct = conduct;
            turn.system_text = utterance;
            next_state = Some(state);
        }
        let closing = user_bye || index + 1 >= self.config.max_turns;
        if closing && !user_bye {
            turn.system_text = format!("{} {CLOSING}", turn.system_text);
        }
        let path = self.log_path(id);
        append(&path, &LogEvent::Turn(turn.clone()))?;
        if closing {
            append(&path, &LogEvent::Closed)?;
            live.session.closed = true;
        }
        if let Some(s) = next_state {
            live.state = s;
        }
        live.session.turns.push(turn.clone());
        Ok(turn)
    }

    pub fn submit_rating(&self, id: &str, success: bool, sentiment: u8) -> Result<Rating> {
        if !(1..=5).contains(&sentiment) {
            return Err(Error::Validation(format!("sentiment must be 1 to 5, got {sentiment}")));
        }
        let live = self.live(id)?;
        let mut live = live.lock().expect("session lock");
        if live.session.turns.is_empty() {
            return Err(Error::Precondition("rate the session after at least one turn".into()));
        }
        if live.session.rating.is_some() {
            return Err(Error::Conflict(format!("session {id} is already rated")));
        }
        let rating = Rating { success, sentiment };
        append(&self.log_path(id), &LogEvent::Rating(rating))?;
        live.session.rating = Some(rating);
        live.session.closed = true;
        Ok(rating)
    }

    /// Re-runs the stack over a stored transcript and returns the system texts.
    pub fn replay(&self, id: &str) -> Result<Vec<String>> {
        let session = self.load_log(id)?;
        let mut state = DialogueState::new(&self.ontology);
        let mut out = Vec::new();
        let mut probe = session.clone();
        probe.turns.clear();
        for t in &session.turns {
            let acts = self.parser.parse(&t.user_text, &state);
            let closing = probe.turns.len() + 1 >= self.config.max_turns;
            let mut text = if acts.is_empty() {
                CLARIFICATION.to_owned()
            } else if acts.iter().any(|a| a.intent == Intent::Bye) {
                self.nlg.realize(&[SemanticAct::bye()], Conduct::Neutral, &mut ChaCha8Rng::seed_from_u64(0))?
            } else {
                let history: Vec<String> = state.history.iter().cloned().collect();
                let perceived = self.recognizer.detect(&t.user_text, &history, &state);
                let mut next = track(&state, &acts, &self.ontology)?;
                next.perceived_emotion = perceived;
                next.remember(&t.user_text);
                let (sys, _, text) = self.respond(&probe, &next)?;
                next.record_system_acts(&sys, &self.ontology);
                state = next;
                text
            };
            if closing && !acts.iter().any(|a| a.intent == Intent::Bye) {
                text = format!("{text} {CLOSING}");
            }
            out.push(text);
            probe.turns.push(t.clone());
        }
        Ok(out)
    }

    pub fn report(&self) -> TrialReport {
        trial_report(&self.sessions(), &self.config.quality)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct IndexEntry {
    id: String,
    variant: Variant,
    checkpoint: String,
}

/// Configurable session rejection rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QualityRules {
    /// Reject when the median user message has fewer tokens.
    pub min_median_tokens: f64,
    /// Reject when non-alphabetic characters exceed this share of user text.
    pub max_non_alpha_ratio: f64,
    /// Reject a "task succeeded" rating when the system never named an entity.
    pub check_contradictions: bool,
}

impl Default for QualityRules {
    fn default() -> Self {
        Self { min_median_tokens: 3.0, max_non_alpha_ratio: 0.5, check_contradictions: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    Unrated,
    NoUserText,
    ShortUtterance,
    NonNatural,
    ContradictoryRating,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub kept: Vec<String>,
    pub rejected: Vec<(String, Vec<RejectReason>)>,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

/// Reasons a session fails the rules; empty means it is kept.
pub fn rejection_reasons(s: &TrialSession, rules: &QualityRules) -> Vec<RejectReason> {
    let mut out = Vec::new();
    if s.rating.is_none() {
        out.push(RejectReason::Unrated);
    }
    let texts: Vec<&str> = s.turns.iter().map(|t| t.user_text.as_str()).collect();
    if texts.is_empty() {
        out.push(RejectReason::NoUserText);
        return out;
    }
    let lens: Vec<f64> = texts.iter().map(|t| t.split_whitespace().count() as f64).collect();
    if median(lens) < rules.min_median_tokens {
        out.push(RejectReason::ShortUtterance);
    }
    let (mut alpha, mut other) = (0usize, 0usize);
    for c in texts.iter().flat_map(|t| t.chars()).filter(|c| !c.is_whitespace()) {
        if c.is_alphabetic() {
            alpha += 1;
        } else {
            other += 1;
        }
    }
    if alpha + other > 0 && other as f64 / (alpha + other) as f64 > rules.max_non_alpha_ratio {
        out.push(RejectReason::NonNatural);
    }
    if rules.check_contradictions {
        let offered = s.turns.iter().flat_map(|t| &t.system_acts).any(|a| {
            a.domain != GENERAL_DOMAIN && matches!(a.intent, Intent::Inform | Intent::Recommend | Intent::Book)
        });
        if s.rating.is_some_and(|r| r.success) && !offered {
            out.push(RejectReason::ContradictoryRating);
        }
    }
    out
}

pub fn quality_filter(sessions: &[TrialSession], rules: &QualityRules) -> QualityReport {
    let mut rep = QualityReport::default();
    for s in sessions {
        let reasons = rejection_reasons(s, rules);
        if reasons.is_empty() {
            rep.kept.push(s.id.clone());
        } else {
            rep.rejected.push((s.id.clone(), reasons));
        }
    }
    rep
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub sessions: usize,
    pub success_rate: f64,
    /// Mean rating on the 1 to 5 scale.
    pub mean_rating: f64,
    /// Mean rating mapped onto [-1, 1].
    pub mean_valence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub total_sessions: usize,
    pub kept: usize,
    pub rejected: Vec<(String, Vec<RejectReason>)>,
    pub by_variant: BTreeMap<Variant, VariantSummary>,
}

/// Success and sentiment over sessions that pass the quality rules.
pub fn trial_report(sessions: &[TrialSession], rules: &QualityRules) -> TrialReport {
    let q = quality_filter(sessions, rules);
    let mut groups: BTreeMap<Variant, Vec<Rating>> = BTreeMap::new();
    for s in sessions.iter().filter(|s| q.kept.contains(&s.id)) {
        if let Some(r) = s.rating {
            groups.entry(s.variant).or_default().push(r);
        }
    }
    let by_variant = groups
        .into_iter()
        .map(|(v, rs)| {
            let n = rs.len() as f64;
            (
                v,
                VariantSummary {
                    sessions: rs.len(),
                    success_rate: rs.iter().filter(|r| r.success).count() as f64 / n,
                    mean_rating: rs.iter().map(|r| f64::from(r.sentiment)).sum::<f64>() / n,
                    mean_valence: rs.iter().map(Rating::valence).sum::<f64>() / n,
                },
            )
        })
        .collect();
    TrialReport { total_sessions: sessions.len(), kept: q.kept.len(), rejected: q.rejected, by_variant }
}
