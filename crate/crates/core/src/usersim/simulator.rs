use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::persona::Persona;
use super::rules::{Event, RuleTable, TransitionContext};
use crate::acts::{Intent, SemanticAct};
use crate::error::{Error, Result};
use crate::goal::{DomainGoal, UserGoal};
use crate::labels::{Conduct, UserEmotion};
use crate::lexicon::CueLexicon;
use crate::ontology::{Entity, Ontology, NAME_SLOT};
use crate::text::normalize;

/// Utterances the simulator will not repeat verbatim.
pub const RECENT_LEN: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgendaKind {
    Constraints,
    Requests,
    Booking,
}

/// One group of user acts, issued together.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgendaItem {
    pub domain: String,
    pub kind: AgendaKind,
}

/// What the user has achieved in one domain.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainProgress {
    /// Constraints the user currently wants; relaxed after a truthful no-offer.
    pub active: BTreeMap<String, String>,
    /// Constraints already told to the system.
    pub told: BTreeMap<String, String>,
    pub relaxed: bool,
    pub offered: Option<String>,
    pub answered: BTreeSet<String>,
    pub booking_given: bool,
    pub booked: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserState {
    pub goal: UserGoal,
    pub persona: Persona,
    pub emotion: UserEmotion,
    /// Consecutive failed system turns.
    pub failures: u32,
    pub turn: usize,
    /// Groups not yet issued, front first.
    pub agenda: VecDeque<AgendaItem>,
    /// Group most recently issued and awaiting an answer.
    pub pending: Option<AgendaItem>,
    pub progress: BTreeMap<String, DomainProgress>,
    pub recent: VecDeque<String>,
    pub closed: bool,
    rng: ChaCha8Rng,
}

impl UserState {
    fn goal_of(&self, domain: &str) -> Option<&DomainGoal> {
        self.goal.domain(domain)
    }

    fn item_done(&self, item: &AgendaItem) -> bool {
        let (Some(g), Some(p)) = (self.goal_of(&item.domain), self.progress.get(&item.domain)) else {
            return true;
        };
        match item.kind {
            AgendaKind::Constraints => p.offered.is_some(),
            AgendaKind::Requests => p.offered.is_some() && g.requests.is_subset(&p.answered),
            AgendaKind::Booking => g.booking.is_none() || p.booked,
        }
    }

    /// True once every domain of the goal is fully served.
    pub fn goal_complete(&self) -> bool {
        self.goal.domains.iter().all(|g| {
            let p = &self.progress[&g.domain];
            p.offered.is_some()
                && g.requests.is_subset(&p.answered)
                && (g.booking.is_none() || p.booked)
        })
    }

    /// Outstanding acts: the pending group followed by the agenda.
    pub fn agenda_acts(&self) -> Vec<SemanticAct> {
        self.pending
            .iter()
            .chain(self.agenda.iter())
            .flat_map(|item| self.acts_for(item))
            .collect()
    }

    fn acts_for(&self, item: &AgendaItem) -> Vec<SemanticAct> {
        let d = item.domain.as_str();
        let (Some(g), Some(p)) = (self.goal_of(d), self.progress.get(d)) else {
            return Vec::new();
        };
        match item.kind {
            AgendaKind::Constraints => p
                .active
                .iter()
                .map(|(s, v)| SemanticAct::inform(d, s, v))
                .collect(),
            AgendaKind::Requests => g
                .requests
                .iter()
                .filter(|s| !p.answered.contains(*s))
                .map(|s| SemanticAct::request(d, s))
                .collect(),
            AgendaKind::Booking => g
                .booking
                .iter()
                .flatten()
                .map(|(s, v)| SemanticAct::inform(d, s, v))
                .collect(),
        }
    }

    fn remember(&mut self, utterance: &str) {
        if self.recent.len() == RECENT_LEN {
            self.recent.pop_front();
        }
        self.recent.push_back(utterance.to_owned());
    }
}

/// Emotion, acts and text of one user turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserReply {
    pub emotion: UserEmotion,
    pub acts: Vec<SemanticAct>,
    pub utterance: String,
    /// Appraisal of the system turn this replies to; absent for the opening.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event: Option<Event>,
}

/// Result of appraising one system turn.
#[derive(Debug, Clone, PartialEq)]
pub struct Appraisal {
    pub event: Event,
    pub emotion: UserEmotion,
    pub failures: u32,
    effects: Effects,
}

#[derive(Debug, Clone, Default, PartialEq)]
struct Effects {
    offers: Vec<(String, String)>,
    answered: Vec<(String, String)>,
    booked: Vec<String>,
    relax: Vec<String>,
    violated: BTreeSet<String>,
    /// System questions the user will answer: (domain, slot, value).
    answers: Vec<(String, String, String)>,
    progress: bool,
    no_offer_valid: bool,
    no_offer_invalid: bool,
}

/// Agenda-based simulated user with a rule-table emotion model.
#[derive(Debug, Clone)]
pub struct UserSimulator {
    pub ontology: Arc<Ontology>,
    pub rules: RuleTable,
    pub lexicon: CueLexicon,
}

const CONSTRAINT_LEADS: &[&str] = &[
    "I am looking for {a_domain} with {list}.",
    "Can you find me {a_domain} with {list}?",
    "I need {a_domain} with {list}.",
    "I would like {a_domain} with {list}.",
    "Please find {a_domain} with {list}.",
];
const RELAX_LEADS: &[&str] = &[
    "Okay, then how about {list} instead?",
    "In that case, try {list}.",
    "Then {list} would be fine.",
];
const REQUEST_LEADS: &[&str] = &[
    "What is the {list}?",
    "Can you tell me the {list}?",
    "Could I get the {list}?",
    "I need the {list} please.",
];
const BOOKING_LEADS: &[&str] = &[
    "Please book it for {people} people on {day}.",
    "Can you book it for {people} people on {day}?",
    "I want to book for {people} people on {day}.",
];
const ANSWER_LEADS: &[&str] = &["The {list} please.", "I would like {list}.", "Make it {list}."];
const BYE_LEADS: &[&str] = &["Goodbye.", "That is all I need, bye.", "Bye for now."];
const TAILS: &[&str] = &["Please.", "Could you check?", "I am still waiting."];

fn join_list(items: &[String]) -> String {
    match items.len() {
        0 => String::new(),
        1 => items[0].clone(),
        n => format!("{} and {}", items[..n - 1].join(", "), items[n - 1]),
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().collect::<String>() + c.as_str(),
        None => String::new(),
    }
}

/// Sentence families of one reply; each is rendered from a variant list.
enum Part {
    Constraints { domain: String, list: String },
    Relax(String),
    Requests(String),
    Booking { people: String, day: String },
    Answer(String),
    Bye,
}

impl Part {
    fn variants(&self) -> &'static [&'static str] {
        match self {
            Part::Constraints { .. } => CONSTRAINT_LEADS,
            Part::Relax(_) => RELAX_LEADS,
            Part::Requests(_) => REQUEST_LEADS,
            Part::Booking { .. } => BOOKING_LEADS,
            Part::Answer(_) => ANSWER_LEADS,
            Part::Bye => BYE_LEADS,
        }
    }

    fn render(&self, variant: usize) -> String {
        let vs = self.variants();
        let t = vs[variant % vs.len()];
        match self {
            Part::Constraints { domain, list } => t.replace("{a_domain}", &crate::goal::with_article(domain)).replace("{list}", list),
            Part::Relax(list) | Part::Requests(list) | Part::Answer(list) => t.replace("{list}", list),
            Part::Booking { people, day } => t.replace("{people}", people).replace("{day}", day),
            Part::Bye => t.to_owned(),
        }
    }
}

impl UserSimulator {
    pub fn new(ontology: Arc<Ontology>, rules: RuleTable, lexicon: CueLexicon) -> Result<Self> {
        rules.validate()?;
        lexicon.validate()?;
        Ok(Self { ontology, rules, lexicon })
    }

    pub fn with_defaults(ontology: Arc<Ontology>) -> Self {
        Self {
            ontology,
            rules: RuleTable::default(),
            lexicon: CueLexicon::default(),
        }
    }

    /// Fresh session: constraints, then requests, then booking, per domain in goal order.
    pub fn init_session(&self, goal: &UserGoal, persona: &Persona, seed: u64) -> Result<UserState> {
        goal.validate(&self.ontology)?;
        persona.validate()?;
        let mut agenda = VecDeque::new();
        let mut progress = BTreeMap::new();
        for g in &goal.domains {
            agenda.push_back(AgendaItem { domain: g.domain.clone(), kind: AgendaKind::Constraints });
            if !g.requests.is_empty() {
                agenda.push_back(AgendaItem { domain: g.domain.clone(), kind: AgendaKind::Requests });
            }
            if g.booking.is_some() {
                agenda.push_back(AgendaItem { domain: g.domain.clone(), kind: AgendaKind::Booking });
            }
            progress.insert(
                g.domain.clone(),
                DomainProgress { active: g.constraints.clone(), ..DomainProgress::default() },
            );
        }
        let emotion = goal
            .domains
            .first()
            .map(|g| persona.disposition(&g.domain))
            .unwrap_or(UserEmotion::Neutral);
        Ok(UserState {
            goal: goal.clone(),
            persona: persona.clone(),
            emotion,
            failures: 0,
            turn: 0,
            agenda,
            pending: None,
            progress,
            recent: VecDeque::with_capacity(RECENT_LEN),
            closed: false,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    /// The user's first message.
    pub fn opening(&self, state: &mut UserState) -> Result<UserReply> {
        if state.closed {
            return Err(Error::SessionClosed);
        }
        let mut acts = Vec::new();
        let mut parts = Vec::new();
        self.advance(state, &mut acts, &mut parts);
        let utterance = self.realize(state, &parts);
        Ok(UserReply { emotion: state.emotion, acts, utterance, event: None })
    }

    /// Classifies the system turn and draws the next emotion. Only the
    /// session generator is advanced; the rest of the state is untouched.
    pub fn appraise(&self, state: &mut UserState, acts: &[SemanticAct], conduct: Conduct) -> Appraisal {
        let effects = self.classify(state, acts);
        let event = if !effects.violated.is_empty() {
            if state.failures > 0 {
                Event::RepeatOffense
            } else {
                Event::Violation
            }
        } else if !effects.booked.is_empty() || (effects.progress && self.completes(state, &effects)) {
            Event::BookingSuccess
        } else if effects.no_offer_invalid {
            Event::NoOfferInvalid
        } else if effects.no_offer_valid {
            Event::NoOfferValid
        } else if effects.progress {
            Event::Progress
        } else {
            Event::OffTopic
        };
        let failures = if event.is_failure() { state.failures + 1 } else { 0 };
        let ctx = TransitionContext {
            turn: state.turn,
            failures,
            patience: state.persona.patience,
            expressiveness: state.persona.expressiveness,
        };
        let u = [state.rng.gen::<f64>(), state.rng.gen::<f64>(), state.rng.gen::<f64>()];
        let emotion = self.rules.transition(state.emotion, event, conduct, &ctx, u);
        Appraisal { event, emotion, failures, effects }
    }

    /// Reacts to a system turn. `_utterance` is accepted for interface
    /// symmetry; the simulator reads the acts.
    pub fn respond(
        &self,
        state: &mut UserState,
        acts: &[SemanticAct],
        conduct: Conduct,
        _utterance: &str,
    ) -> Result<UserReply> {
        if state.closed {
            return Err(Error::SessionClosed);
        }
        state.turn += 1;
        let appraisal = self.appraise(state, acts, conduct);
        state.emotion = appraisal.emotion;
        state.failures = appraisal.failures;
        self.apply(state, &appraisal.effects);

        let mut out_acts = Vec::new();
        let mut parts = Vec::new();
        if state.goal_complete() {
            out_acts.push(SemanticAct::bye());
            parts.push(Part::Bye);
            state.pending = None;
            state.closed = true;
        } else {
            let e = &appraisal.effects;
            let mut answers: Vec<String> = Vec::new();
            for (d, slot, value) in &e.answers {
                let act = SemanticAct::inform(d, slot, value);
                if !out_acts.contains(&act) {
                    out_acts.push(act);
                    answers.push(format!("{slot} {value}"));
                }
            }
            if !answers.is_empty() {
                parts.push(Part::Answer(join_list(&answers)));
            }
            for d in &e.relax {
                let g = state.goal_of(d).expect("relaxed goal domain");
                if let Some(r) = &g.fallback {
                    out_acts.push(SemanticAct::inform(d, &r.slot, &r.value));
                    parts.push(Part::Relax(format!("{} {}", r.slot, r.value)));
                }
            }
            for d in &e.violated {
                let item = AgendaItem { domain: d.clone(), kind: AgendaKind::Constraints };
                if state.pending.as_ref() != Some(&item) {
                    if let Some(p) = state.pending.take() {
                        state.agenda.push_front(p);
                    }
                    state.pending = Some(item);
                }
            }
            let stuck = state.pending.as_ref().map(|p| !state.item_done(p)).unwrap_or(false);
            if stuck {
                if out_acts.is_empty() {
                    let item = state.pending.clone().expect("stuck implies pending");
                    self.issue(state, &item, &mut out_acts, &mut parts);
                }
            } else {
                self.advance(state, &mut out_acts, &mut parts);
            }
            if out_acts.is_empty() {
                out_acts.push(SemanticAct::bye());
                parts.push(Part::Bye);
                state.closed = true;
            }
        }
        let utterance = self.realize(state, &parts);
        Ok(UserReply { emotion: state.emotion, acts: out_acts, utterance, event: Some(appraisal.event) })
    }

    /// Moves to the next unfinished agenda group and issues it.
    fn advance(&self, state: &mut UserState, acts: &mut Vec<SemanticAct>, parts: &mut Vec<Part>) {
        state.pending = None;
        while let Some(item) = state.agenda.pop_front() {
            if !state.item_done(&item) {
                self.issue(state, &item, acts, parts);
                state.pending = Some(item);
                return;
            }
        }
    }

    fn issue(&self, state: &mut UserState, item: &AgendaItem, acts: &mut Vec<SemanticAct>, parts: &mut Vec<Part>) {
        let new = state.acts_for(item);
        let fresh: Vec<SemanticAct> = new.into_iter().filter(|a| !acts.contains(a)).collect();
        if fresh.is_empty() {
            return;
        }
        let p = state.progress.get_mut(&item.domain).expect("goal domain");
        match item.kind {
            AgendaKind::Constraints => {
                let list: Vec<String> = fresh
                    .iter()
                    .map(|a| format!("{} {}", a.slot().unwrap_or(""), a.value().unwrap_or("")))
                    .collect();
                for a in &fresh {
                    p.told.insert(a.slot().unwrap_or("").to_owned(), a.value().unwrap_or("").to_owned());
                }
                parts.push(Part::Constraints { domain: item.domain.clone(), list: join_list(&list) });
            }
            AgendaKind::Requests => {
                let list: Vec<String> = fresh.iter().filter_map(|a| a.slot().map(str::to_owned)).collect();
                parts.push(Part::Requests(join_list(&list)));
            }
            AgendaKind::Booking => {
                p.booking_given = true;
                let get = |slot: &str| {
                    fresh
                        .iter()
                        .find(|a| a.slot() == Some(slot))
                        .and_then(|a| a.value())
                        .unwrap_or("")
                        .to_owned()
                };
                if fresh.len() == 2 && !get("people").is_empty() && !get("day").is_empty() {
                    parts.push(Part::Booking { people: get("people"), day: get("day") });
                } else {
                    let list: Vec<String> = fresh
                        .iter()
                        .map(|a| format!("{} {}", a.slot().unwrap_or(""), a.value().unwrap_or("")))
                        .collect();
                    parts.push(Part::Answer(join_list(&list)));
                }
            }
        }
        acts.extend(fresh);
    }

    fn completes(&self, state: &UserState, effects: &Effects) -> bool {
        let mut probe = state.clone();
        self.apply(&mut probe, effects);
        probe.goal_complete()
    }

    fn apply(&self, state: &mut UserState, e: &Effects) {
        for d in &e.violated {
            if let Some(p) = state.progress.get_mut(d) {
                p.offered = None;
                p.booked = false;
            }
        }
        for (d, name) in &e.offers {
            if e.violated.contains(d) {
                continue;
            }
            if let Some(p) = state.progress.get_mut(d) {
                p.offered = Some(name.clone());
            }
        }
        for (d, slot) in &e.answered {
            if let Some(p) = state.progress.get_mut(d) {
                p.answered.insert(slot.clone());
            }
        }
        for d in &e.booked {
            if let Some(p) = state.progress.get_mut(d) {
                p.booked = true;
            }
        }
        for d in &e.relax {
            let fallback = state.goal_of(d).and_then(|g| g.fallback.clone());
            if let (Some(p), Some(r)) = (state.progress.get_mut(d), fallback) {
                p.active.insert(r.slot.clone(), r.value.clone());
                p.told.insert(r.slot, r.value);
                p.relaxed = true;
            }
        }
        for (d, slot, value) in &e.answers {
            let schema = self.ontology.domain(d).expect("goal domain");
            if let Some(p) = state.progress.get_mut(d) {
                if schema.is_book_slot(slot) {
                    p.booking_given = true;
                } else {
                    p.told.insert(slot.clone(), value.clone());
                }
            }
        }
    }

    fn identify<'a>(&'a self, domain: &str, slot: &str, value: &str) -> Option<&'a Entity> {
        let mut hits = self
            .ontology
            .entities(domain)
            .iter()
            .filter(|e| e.get(slot) == Some(value));
        let first = hits.next()?;
        hits.next().is_none().then_some(first)
    }

    fn classify(&self, state: &UserState, acts: &[SemanticAct]) -> Effects {
        let mut e = Effects::default();
        for act in acts {
            let d = act.domain.as_str();
            let (Some(g), Some(p)) = (state.goal_of(d), state.progress.get(d)) else {
                continue;
            };
            let schema = self.ontology.domain(d).expect("goal domain");
            let started = !p.told.is_empty();
            match (act.intent, act.slot(), act.value()) {
                (Intent::Inform | Intent::Recommend | Intent::Book, Some(slot), Some(value)) => {
                    if !started {
                        continue;
                    }
                    if let Some(ent) = self.identify(d, slot, value) {
                        if !ent.matches(&p.active) {
                            e.violated.insert(d.to_owned());
                            continue;
                        }
                        if p.offered.as_deref() != Some(ent.name()) {
                            if p.offered.is_none() {
                                e.progress = true;
                            }
                            e.offers.push((d.to_owned(), ent.name().to_owned()));
                        }
                    } else if schema.is_informable(slot) && slot != NAME_SLOT && p.active.get(slot).is_some_and(|v| v != value) {
                        e.violated.insert(d.to_owned());
                        continue;
                    }
                    if act.intent == Intent::Inform && schema.is_requestable(slot) {
                        let ok = self
                            .ontology
                            .entities(d)
                            .iter()
                            .any(|x| x.matches(&p.active) && x.get(slot) == Some(value));
                        if !ok {
                            e.violated.insert(d.to_owned());
                        } else if g.requests.contains(slot) && !p.answered.contains(slot) {
                            e.answered.push((d.to_owned(), slot.to_owned()));
                            e.progress = true;
                        }
                    }
                    if act.intent == Intent::Book
                        && g.booking.is_some()
                        && p.booking_given
                        && !p.booked
                        && !e.violated.contains(d)
                    {
                        e.booked.push(d.to_owned());
                        e.progress = true;
                    }
                }
                (Intent::Confirm, Some(slot), Some(value)) => {
                    if p.active.get(slot).map(|v| v != value).unwrap_or(false) {
                        e.violated.insert(d.to_owned());
                    }
                }
                (Intent::NoOffer, _, _) => {
                    if started && self.ontology.count_matching(d, &p.told) == 0 {
                        e.no_offer_valid = true;
                        if !p.relaxed && g.fallback.is_some() && !e.relax.iter().any(|x| x == d) {
                            e.relax.push(d.to_owned());
                        }
                    } else {
                        e.no_offer_invalid = true;
                    }
                }
                (Intent::Request, Some(slot), None) => {
                    if schema.is_book_slot(slot) {
                        if let (false, Some(b)) = (p.booking_given, &g.booking) {
                            if b.contains_key(slot) && !e.answers.iter().any(|(dd, s, _)| dd == d && b.contains_key(s)) {
                                for (s, v) in b {
                                    e.answers.push((d.to_owned(), s.clone(), v.clone()));
                                }
                                e.progress = true;
                            }
                        }
                        continue;
                    }
                    let value = if !p.told.contains_key(slot) {
                        p.active.get(slot).cloned()
                    } else {
                        None
                    };
                    if let Some(v) = value {
                        if !e.answers.iter().any(|(dd, s, _)| dd == d && s == slot) {
                            e.answers.push((d.to_owned(), slot.to_owned(), v));
                            e.progress = true;
                        }
                    }
                }
                _ => {}
            }
        }
        e
    }

    /// Renders parts into text that differs from the recent utterances,
    /// prefixed with an emotion cue with probability = expressiveness.
    fn realize(&self, state: &mut UserState, parts: &[Part]) -> String {
        let surface = state.emotion != UserEmotion::Neutral
            && state.rng.gen::<f64>() < state.persona.expressiveness;
        let cue = if surface {
            self.lexicon.pick(state.emotion, &mut state.rng).map(str::to_owned)
        } else {
            None
        };
        let start: usize = state.rng.gen_range(0..60);
        let recent: Vec<String> = state.recent.iter().map(|s| normalize(s)).collect();
        let compose = |variant: usize, tail: Option<&str>| {
            let mut body: Vec<String> = parts
                .iter()
                .enumerate()
                .map(|(i, p)| p.render(variant + i))
                .collect();
            if let Some(t) = tail {
                body.push(t.to_owned());
            }
            let body = body.join(" ");
            match &cue {
                Some(c) => format!("{}. {}", capitalize(c), body),
                None => body,
            }
        };
        let mut chosen = None;
        'search: for tail in std::iter::once(None).chain(TAILS.iter().map(|t| Some(*t))) {
            for k in 0..60 {
                let text = compose(start + k, tail);
                if !recent.contains(&normalize(&text)) {
                    chosen = Some(text);
                    break 'search;
                }
            }
        }
        let text = chosen.unwrap_or_else(|| {
            let mut t = compose(start, None);
            t.push_str(&format!(" ({})", state.turn));
            t
        });
        state.remember(&text);
        text
    }
}

/// Convenience for tests and tools: the first entity of `domain` matching `constraints`.
pub fn first_match<'a>(ontology: &'a Ontology, domain: &str, constraints: &BTreeMap<String, String>) -> Option<&'a Entity> {
    ontology.entities(domain).iter().find(|e| e.matches(constraints))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::goal::{sample_goal, GoalConfig};
    use crate::usersim::PersonaConfig;

    fn sim() -> UserSimulator {
        UserSimulator::with_defaults(Arc::new(Ontology::desk()))
    }

    fn goal(seed: u64, unsat: f64) -> UserGoal {
        let cfg = GoalConfig { unsatisfiable_probability: unsat, ..GoalConfig::default() };
        sample_goal(&Ontology::desk(), &mut ChaCha8Rng::seed_from_u64(seed), &cfg).unwrap()
    }

    fn quiet() -> Persona {
        Persona { expressiveness: 0.0, ..Persona::default() }
    }

    /// Answers exactly what the user just asked for, using only the user's words.
    fn scripted(o: &Ontology, told: &mut BTreeMap<String, BTreeMap<String, String>>, user: &[SemanticAct]) -> Vec<SemanticAct> {
        let mut out = Vec::new();
        for a in user {
            if a.intent == Intent::Inform {
                let schema = o.domain(&a.domain).unwrap();
                if schema.is_informable(a.slot().unwrap()) {
                    told.entry(a.domain.clone()).or_default().insert(a.slot().unwrap().into(), a.value().unwrap().into());
                }
            }
        }
        let domains: BTreeSet<&str> = user.iter().map(|a| a.domain.as_str()).collect();
        for d in domains {
            let c = told.get(d).cloned().unwrap_or_default();
            let pick = first_match(o, d, &c);
            for a in user.iter().filter(|a| a.domain == d) {
                let schema = o.domain(d).unwrap();
                match (a.intent, a.slot()) {
                    (Intent::Inform, Some(s)) if schema.is_informable(s) => {
                        let act = match pick {
                            Some(e) => SemanticAct::recommend(d, NAME_SLOT, e.name()),
                            None => SemanticAct::no_offer(d),
                        };
                        if !out.contains(&act) {
                            out.push(act);
                        }
                    }
                    (Intent::Inform, Some(s)) if schema.is_book_slot(s) => {
                        let act = SemanticAct::book(d, pick.unwrap().name());
                        if !out.contains(&act) {
                            out.push(act);
                        }
                    }
                    (Intent::Request, Some(s)) => {
                        out.push(SemanticAct::inform(d, s, pick.unwrap().get(s).unwrap()));
                    }
                    _ => {}
                }
            }
        }
        out
    }

    #[test]
    fn persona_disposition_sets_initial_emotion() {
        let s = sim();
        let mut g = goal(3, 0.0);
        g.domains.truncate(1);
        let d = g.domains[0].domain.clone();
        let mut p = Persona::default();
        p.dispositions.insert(d, UserEmotion::Excited);
        assert_eq!(s.init_session(&g, &p, 1).unwrap().emotion, UserEmotion::Excited);
        assert_eq!(s.init_session(&g, &Persona::default(), 1).unwrap().emotion, UserEmotion::Neutral);
    }

    #[test]
    fn same_seed_same_state() {
        let s = sim();
        let g = goal(4, 0.0);
        let a = s.init_session(&g, &Persona::default(), 9).unwrap();
        let b = s.init_session(&g, &Persona::default(), 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn agenda_seeds_constraints_before_requests() {
        let s = sim();
        let g = goal(5, 0.0);
        let st = s.init_session(&g, &Persona::default(), 0).unwrap();
        let acts = st.agenda_acts();
        let first_request = acts.iter().position(|a| a.intent == Intent::Request).unwrap();
        let n_constraints = g.domains[0].constraints.len();
        assert!(acts[..n_constraints].iter().all(|a| a.intent == Intent::Inform));
        assert_eq!(first_request, n_constraints);
    }

    #[test]
    fn opening_informs_constraints_plainly() {
        let s = sim();
        let mut g = goal(6, 0.0);
        g.domains.truncate(1);
        let d = g.domains[0].domain.clone();
        g.domains[0].constraints = [("area".to_string(), "north".to_string())].into();
        let any = s.ontology.entities(&d).iter().find(|e| e.get("area") == Some("north")).unwrap().clone();
        let _ = any;
        let mut st = s.init_session(&g, &quiet(), 0).unwrap();
        let r = s.opening(&mut st).unwrap();
        assert_eq!(r.acts, vec![SemanticAct::inform(&d, "area", "north")]);
        assert!(r.utterance.contains("area north"));
        assert_eq!(s.lexicon.detect(&r.utterance), None);
    }

    #[test]
    fn satisfied_expressive_user_surfaces_cue() {
        let s = sim();
        let g = goal(8, 0.0);
        let mut p = Persona { expressiveness: 1.0, ..Persona::default() };
        p.dispositions.insert(g.domains[0].domain.clone(), UserEmotion::Satisfied);
        let mut st = s.init_session(&g, &p, 2).unwrap();
        let r = s.opening(&mut st).unwrap();
        assert_eq!(s.lexicon.detect(&r.utterance), Some(UserEmotion::Satisfied));
    }

    #[test]
    fn scripted_correct_system_finishes_happy_and_fast() {
        let s = sim();
        let o = Ontology::desk();
        let pcfg = PersonaConfig::default();
        for seed in 0..300 {
            let g = goal(seed, 0.0);
            let names: Vec<&str> = g.domain_order();
            let persona = crate::usersim::sample_persona(&pcfg, &names, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let mut st = s.init_session(&g, &persona, seed).unwrap();
            let agenda_len = st.agenda_acts().len();
            let mut told = BTreeMap::new();
            let mut reply = s.opening(&mut st).unwrap();
            let mut turns = 1;
            while !st.closed {
                let sys = scripted(&o, &mut told, &reply.acts);
                reply = s.respond(&mut st, &sys, Conduct::Neutral, "").unwrap();
                turns += 1;
                assert!(turns <= agenda_len + 2, "seed {seed} ran {turns} turns");
            }
            assert_eq!(reply.acts, vec![SemanticAct::bye()]);
            assert!(
                matches!(reply.emotion, UserEmotion::Satisfied | UserEmotion::Excited),
                "seed {seed} ended {}",
                reply.emotion
            );
        }
    }

    #[test]
    fn respond_after_bye_is_session_closed() {
        let s = sim();
        let o = Ontology::desk();
        let g = goal(11, 0.0);
        let mut st = s.init_session(&g, &quiet(), 0).unwrap();
        let mut told = BTreeMap::new();
        let mut reply = s.opening(&mut st).unwrap();
        while !st.closed {
            let sys = scripted(&o, &mut told, &reply.acts);
            reply = s.respond(&mut st, &sys, Conduct::Neutral, "").unwrap();
        }
        assert!(matches!(s.respond(&mut st, &[], Conduct::Neutral, ""), Err(Error::SessionClosed)));
    }

    #[test]
    fn wrong_offer_is_a_violation_and_constraints_are_repeated() {
        let s = sim();
        let o = Ontology::desk();
        let mut g = goal(12, 0.0);
        g.domains.truncate(1);
        let d = g.domains[0].domain.clone();
        let mut st = s.init_session(&g, &quiet(), 0).unwrap();
        let first = s.opening(&mut st).unwrap();
        let bad = o.entities(&d).iter().find(|e| !e.matches(&g.domains[0].constraints)).unwrap();
        let sys = [SemanticAct::recommend(&d, NAME_SLOT, bad.name())];
        let r = s.respond(&mut st, &sys, Conduct::Neutral, "").unwrap();
        assert_eq!(r.event, Some(Event::Violation));
        assert_eq!(r.acts, first.acts);
        assert_ne!(normalize(&r.utterance), normalize(&first.utterance));
        let r2 = s.respond(&mut st, &sys, Conduct::Neutral, "").unwrap();
        assert_eq!(r2.event, Some(Event::RepeatOffense));
    }

    #[test]
    fn truthful_no_offer_frightens_then_relaxes() {
        let s = sim();
        let g = goal(13, 1.0);
        let d = g.domains[0].domain.clone();
        let fb = g.domains[0].fallback.clone().unwrap();
        let mut st = s.init_session(&g, &quiet(), 0).unwrap();
        s.opening(&mut st).unwrap();
        let r = s.respond(&mut st, &[SemanticAct::no_offer(&d)], Conduct::Neutral, "").unwrap();
        assert_eq!(r.event, Some(Event::NoOfferValid));
        assert_eq!(r.acts, vec![SemanticAct::inform(&d, &fb.slot, &fb.value)]);
        let r = s.respond(&mut st, &[SemanticAct::no_offer(&d)], Conduct::Neutral, "").unwrap();
        assert_eq!(r.event, Some(Event::NoOfferInvalid));
    }

    #[test]
    fn never_repeats_recent_utterances_verbatim() {
        let s = sim();
        for seed in 0..50 {
            let g = goal(seed, 0.2);
            let mut st = s.init_session(&g, &quiet(), seed).unwrap();
            let mut seen: VecDeque<String> = VecDeque::new();
            let r = s.opening(&mut st).unwrap();
            seen.push_back(normalize(&r.utterance));
            for _ in 0..15 {
                let r = s.respond(&mut st, &[], Conduct::Neutral, "").unwrap();
                let n = normalize(&r.utterance);
                assert!(!seen.contains(&n), "seed {seed}: repeated {n}");
                seen.push_back(n);
                if seen.len() > RECENT_LEN {
                    seen.pop_front();
                }
                if st.closed {
                    break;
                }
            }
        }
    }
}
