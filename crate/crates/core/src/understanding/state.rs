use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::acts::{Intent, SemanticAct, GENERAL_DOMAIN};
use crate::error::{Error, Result};
use crate::labels::UserEmotion;
use crate::ontology::Ontology;

/// Number of past utterances kept in the state digest.
pub const HISTORY_LEN: usize = 3;

/// Coarse count of database entities matching the tracked constraints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MatchBucket {
    Zero,
    One,
    Few,
    Many,
}

impl MatchBucket {
    pub fn from_count(n: usize) -> Self {
        match n {
            0 => MatchBucket::Zero,
            1 => MatchBucket::One,
            2..=4 => MatchBucket::Few,
            _ => MatchBucket::Many,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainState {
    pub constraints: BTreeMap<String, String>,
    /// Slots the user asked for that the system has not yet provided.
    pub requests: BTreeSet<String>,
    pub booking: BTreeMap<String, String>,
    pub booked: bool,
    /// Name of the entity the system is currently offering.
    pub offered: Option<String>,
    pub match_bucket: MatchBucket,
}

impl DomainState {
    fn new(ontology: &Ontology, domain: &str) -> Self {
        let constraints = BTreeMap::new();
        let bucket = MatchBucket::from_count(ontology.count_matching(domain, &constraints));
        Self {
            constraints,
            requests: BTreeSet::new(),
            booking: BTreeMap::new(),
            booked: false,
            offered: None,
            match_bucket: bucket,
        }
    }

    /// True once the user has supplied every booking slot of the domain.
    pub fn booking_ready(&self, book_slots: &BTreeMap<String, Vec<String>>) -> bool {
        !book_slots.is_empty() && book_slots.keys().all(|s| self.booking.contains_key(s))
    }
}

/// Task state extended with the perceived user emotion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogueState {
    pub domains: BTreeMap<String, DomainState>,
    pub active_domain: Option<String>,
    pub last_user_acts: Vec<SemanticAct>,
    pub perceived_emotion: UserEmotion,
    pub history: VecDeque<String>,
}

impl DialogueState {
    pub fn new(ontology: &Ontology) -> Self {
        Self {
            domains: ontology
                .domains
                .iter()
                .map(|d| (d.name.clone(), DomainState::new(ontology, &d.name)))
                .collect(),
            active_domain: None,
            last_user_acts: Vec::new(),
            perceived_emotion: UserEmotion::Neutral,
            history: VecDeque::with_capacity(HISTORY_LEN),
        }
    }

    pub fn domain(&self, name: &str) -> Option<&DomainState> {
        self.domains.get(name)
    }

    /// Appends an utterance to the bounded history digest.
    pub fn remember(&mut self, utterance: &str) {
        if self.history.len() == HISTORY_LEN {
            self.history.pop_front();
        }
        self.history.push_back(utterance.to_owned());
    }

    /// Folds the system's own acts into the state: offered entity, answered
    /// requests and completed bookings.
    pub fn record_system_acts(&mut self, acts: &[SemanticAct], ontology: &Ontology) {
        for act in acts {
            let Some(ds) = self.domains.get_mut(&act.domain) else {
                continue;
            };
            if let (Some(slot), Some(value)) = (act.slot(), act.value()) {
                if matches!(act.intent, Intent::Inform | Intent::Recommend | Intent::Book) {
                    let hit = ontology
                        .entities(&act.domain)
                        .iter()
                        .filter(|e| e.get(slot) == Some(value))
                        .collect::<Vec<_>>();
                    if hit.len() == 1 {
                        ds.offered = Some(hit[0].name().to_owned());
                    }
                }
                if act.intent == Intent::Inform {
                    ds.requests.remove(slot);
                }
            }
            if act.intent == Intent::Book {
                ds.booked = true;
            }
        }
    }
}

/// Applies user acts to the previous state.
///
/// Inform on an informable slot overwrites the constraint, inform on a booking
/// slot records booking details, request adds an outstanding request. Any act
/// naming an unknown domain or slot rejects the whole update.
pub fn track(prev: &DialogueState, user_acts: &[SemanticAct], ontology: &Ontology) -> Result<DialogueState> {
    if user_acts.is_empty() {
        return Ok(prev.clone());
    }
    for act in user_acts {
        act.validate_shape()
            .map_err(|e| Error::Tracking(e.to_string()))?;
        if act.domain == GENERAL_DOMAIN {
            if !act.intent.is_general() {
                return Err(Error::Tracking(format!("{act} needs a task domain")));
            }
            continue;
        }
        let schema = ontology
            .domain(&act.domain)
            .ok_or_else(|| Error::Tracking(format!("unknown domain in {act}")))?;
        if let Some(slot) = act.slot() {
            if !schema.knows_slot(slot) {
                return Err(Error::Tracking(format!("unknown slot in {act}")));
            }
        }
    }

    let mut next = prev.clone();
    let mut touched = BTreeSet::new();
    for act in user_acts {
        if act.domain == GENERAL_DOMAIN {
            continue;
        }
        let schema = ontology.domain(&act.domain).expect("validated above");
        let ds = next.domains.get_mut(&act.domain).expect("state covers ontology");
        match (act.intent, act.slot(), act.value()) {
            (Intent::Inform, Some(slot), Some(value)) if schema.is_book_slot(slot) => {
                ds.booking.insert(slot.to_owned(), value.to_owned());
            }
            (Intent::Inform, Some(slot), Some(value)) if schema.is_informable(slot) => {
                ds.constraints.insert(slot.to_owned(), value.to_owned());
                touched.insert(act.domain.clone());
            }
            (Intent::Request, Some(slot), None) => {
                ds.requests.insert(slot.to_owned());
            }
            _ => {}
        }
        next.active_domain = Some(act.domain.clone());
    }
    for domain in touched {
        let ds = next.domains.get_mut(&domain).expect("state covers ontology");
        ds.match_bucket = MatchBucket::from_count(ontology.count_matching(&domain, &ds.constraints));
        let still_valid = ds
            .offered
            .as_deref()
            .and_then(|name| ontology.entity_by_name(&domain, name))
            .map(|e| e.matches(&ds.constraints))
            .unwrap_or(false);
        if !still_valid {
            ds.offered = None;
            ds.booked = false;
        }
    }
    next.last_user_acts = user_acts.to_vec();
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inform_sets_constraint_and_bucket_matches_exhaustive_count() {
        let o = Ontology::desk();
        let s0 = DialogueState::new(&o);
        let s1 = track(&s0, &[SemanticAct::inform("restaurant", "food", "italian")], &o).unwrap();
        let rs = s1.domain("restaurant").unwrap();
        assert_eq!(rs.constraints.get("food").map(String::as_str), Some("italian"));
        let mut n = 0;
        for e in &o.database["restaurant"] {
            if e.0.get("food").map(|v| v == "italian").unwrap_or(false) {
                n += 1;
            }
        }
        assert_eq!(rs.match_bucket, MatchBucket::from_count(n));
        assert_eq!(s1.active_domain.as_deref(), Some("restaurant"));
    }

    #[test]
    fn empty_acts_leave_state_identical() {
        let o = Ontology::desk();
        let s0 = track(
            &DialogueState::new(&o),
            &[SemanticAct::request("hotel", "phone")],
            &o,
        )
        .unwrap();
        assert_eq!(track(&s0, &[], &o).unwrap(), s0);
    }

    #[test]
    fn last_write_wins() {
        let o = Ontology::desk();
        let s = DialogueState::new(&o);
        let s = track(&s, &[SemanticAct::inform("restaurant", "food", "italian")], &o).unwrap();
        let s = track(&s, &[SemanticAct::inform("restaurant", "food", "chinese")], &o).unwrap();
        assert_eq!(s.domain("restaurant").unwrap().constraints["food"], "chinese");
    }

    #[test]
    fn unknown_slot_is_rejected() {
        let o = Ontology::desk();
        let s = DialogueState::new(&o);
        let err = track(
            &s,
            &[
                SemanticAct::inform("restaurant", "food", "italian"),
                SemanticAct::inform("restaurant", "colour", "blue"),
            ],
            &o,
        );
        assert!(matches!(err, Err(Error::Tracking(_))));
        assert!(track(&s, &[SemanticAct::request("spaceport", "phone")], &o).is_err());
    }

    #[test]
    fn system_acts_mark_offers_and_answers() {
        let o = Ontology::desk();
        let e = o.entities("hotel")[0].clone();
        let mut s = track(
            &DialogueState::new(&o),
            &[SemanticAct::request("hotel", "phone")],
            &o,
        )
        .unwrap();
        s.record_system_acts(
            &[
                SemanticAct::recommend("hotel", "name", e.name()),
                SemanticAct::inform("hotel", "phone", e.get("phone").unwrap()),
            ],
            &o,
        );
        let hs = s.domain("hotel").unwrap();
        assert_eq!(hs.offered.as_deref(), Some(e.name()));
        assert!(hs.requests.is_empty());
    }

    #[test]
    fn changed_constraint_invalidates_offer() {
        let o = Ontology::desk();
        let e = o.entities("restaurant")[0].clone();
        let mut s = DialogueState::new(&o);
        s.record_system_acts(&[SemanticAct::recommend("restaurant", "name", e.name())], &o);
        let other_food = o.domain("restaurant").unwrap().informable["food"]
            .iter()
            .find(|f| Some(f.as_str()) != e.get("food"))
            .unwrap()
            .clone();
        let s = track(&s, &[SemanticAct::inform("restaurant", "food", &other_food)], &o).unwrap();
        assert!(s.domain("restaurant").unwrap().offered.is_none());
    }

    #[test]
    fn history_is_bounded() {
        let o = Ontology::desk();
        let mut s = DialogueState::new(&o);
        for i in 0..5 {
            s.remember(&format!("u{i}"));
        }
        assert_eq!(s.history, ["u2", "u3", "u4"]);
    }
}
