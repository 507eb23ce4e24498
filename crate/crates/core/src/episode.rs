//! Episode records and the success/inform judge.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::acts::{Intent, SemanticAct};
use crate::goal::UserGoal;
use crate::labels::{Conduct, UserEmotion};
use crate::ontology::{Ontology, NAME_SLOT};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub task: f64,
    pub emotion: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemTurn {
    pub acts: Vec<SemanticAct>,
    pub conduct: Conduct,
    pub utterance: String,
}

/// One user message and, unless the dialogue ended there, the system reply.
///
/// `reward` scores the system decision of the *previous* turn, since it is
/// computed from the user's reaction recorded here. It is absent on turn 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub index: usize,
    pub user_utterance: String,
    pub user_acts: Vec<SemanticAct>,
    pub true_emotion: UserEmotion,
    pub perceived_emotion: UserEmotion,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reward: Option<RewardBreakdown>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemTurn>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub success: bool,
    pub inform: bool,
    #[serde(rename = "return")]
    pub episode_return: f64,
    #[serde(default)]
    pub aborted: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeMeta {
    pub checkpoint: String,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub goal: UserGoal,
    pub turns: Vec<Turn>,
    pub outcome: Outcome,
    pub seed: u64,
    #[serde(default)]
    pub metadata: EpisodeMeta,
}

impl EpisodeRecord {
    pub fn system_turns(&self) -> impl Iterator<Item = &SystemTurn> {
        self.turns.iter().filter_map(|t| t.system.as_ref())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub success: bool,
    pub inform: bool,
}

/// Decides inform and success for a finished dialogue.
///
/// An entity counts as offered when a value-carrying system act names it, or
/// quotes an attribute value that only that entity has. Inform holds when every
/// goal domain had at least one entity offered and every offered entity meets
/// the (fallback-relaxed) constraints. Success additionally needs each requested
/// slot informed with an acceptable entity's value and, where the goal books,
/// a booking of an acceptable entity made after the user gave booking details.
pub fn judge_outcome(ontology: &Ontology, goal: &UserGoal, turns: &[crate::episode::Turn]) -> Verdict {
    let mut inform = true;
    let mut success = true;
    for g in &goal.domains {
        let constraints = g.effective_constraints();
        let rows = ontology.entities(&g.domain);
        let acceptable: BTreeSet<usize> = rows
            .iter()
            .enumerate()
            .filter(|(_, e)| e.matches(&constraints))
            .map(|(i, _)| i)
            .collect();

        let mut by_value: BTreeMap<(&str, &str), Vec<usize>> = BTreeMap::new();
        for (i, e) in rows.iter().enumerate() {
            for (s, v) in &e.0 {
                by_value.entry((s.as_str(), v.as_str())).or_default().push(i);
            }
        }
        let identify = |act: &SemanticAct| -> Option<usize> {
            let key = (act.slot()?, act.value()?);
            match by_value.get(&key) {
                Some(ids) if ids.len() == 1 => Some(ids[0]),
                _ => None,
            }
        };

        let mut offered = BTreeSet::new();
        let mut informed: BTreeSet<&str> = BTreeSet::new();
        let mut booked = false;
        let mut booking_details_seen = false;
        for turn in turns {
            if turn.user_acts.iter().any(|a| {
                a.domain == g.domain
                    && a.intent == Intent::Inform
                    && a.slot().map(|s| s == "people" || s == "day").unwrap_or(false)
            }) {
                booking_details_seen = true;
            }
            let Some(sys) = &turn.system else { continue };
            for act in sys.acts.iter().filter(|a| a.domain == g.domain) {
                if !matches!(act.intent, Intent::Inform | Intent::Recommend | Intent::Book) {
                    continue;
                }
                if let Some(id) = identify(act) {
                    offered.insert(id);
                }
                if act.intent == Intent::Inform {
                    if let (Some(s), Some(v)) = (act.slot(), act.value()) {
                        if acceptable.iter().any(|&i| rows[i].get(s) == Some(v)) {
                            informed.insert(s);
                        }
                    }
                }
                if act.intent == Intent::Book && booking_details_seen {
                    let named = act
                        .value()
                        .and_then(|v| rows.iter().position(|e| e.get(NAME_SLOT) == Some(v)));
                    if named.map(|i| acceptable.contains(&i)).unwrap_or(false) {
                        booked = true;
                    }
                }
            }
        }

        let domain_inform = !offered.is_empty() && offered.is_subset(&acceptable);
        inform &= domain_inform;
        let requests_met = g.requests.iter().all(|r| informed.contains(r.as_str()));
        let booking_met = g.booking.is_none() || booked;
        success &= domain_inform && requests_met && booking_met;
    }
    Verdict { success, inform }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::goal::DomainGoal;

    fn goal_for(o: &Ontology, idx: usize) -> (UserGoal, crate::ontology::Entity) {
        let e = o.entities("restaurant")[idx].clone();
        let mut constraints = BTreeMap::new();
        constraints.insert("food".to_string(), e.get("food").unwrap().to_string());
        constraints.insert("area".to_string(), e.get("area").unwrap().to_string());
        let g = UserGoal {
            domains: vec![DomainGoal {
                domain: "restaurant".into(),
                constraints,
                requests: ["phone".to_string()].into_iter().collect(),
                booking: None,
                unsatisfiable: false,
                fallback: None,
            }],
        };
        (g, e)
    }

    fn sys_turn(index: usize, acts: Vec<SemanticAct>) -> Turn {
        Turn {
            index,
            user_utterance: String::new(),
            user_acts: vec![],
            true_emotion: UserEmotion::Neutral,
            perceived_emotion: UserEmotion::Neutral,
            reward: None,
            system: Some(SystemTurn {
                acts,
                conduct: Conduct::Neutral,
                utterance: String::new(),
            }),
        }
    }

    #[test]
    fn correct_offer_and_requests_succeed() {
        let o = Ontology::desk();
        let (g, e) = goal_for(&o, 0);
        let turns = vec![
            sys_turn(0, vec![SemanticAct::recommend("restaurant", "name", e.name())]),
            sys_turn(
                1,
                vec![SemanticAct::inform("restaurant", "phone", e.get("phone").unwrap())],
            ),
        ];
        assert_eq!(
            judge_outcome(&o, &g, &turns),
            Verdict {
                success: true,
                inform: true
            }
        );
    }

    #[test]
    fn offering_a_violating_entity_fails_inform() {
        let o = Ontology::desk();
        let (g, e) = goal_for(&o, 0);
        let food = e.get("food").unwrap();
        let wrong = o
            .entities("restaurant")
            .iter()
            .find(|x| x.get("food") != Some(food))
            .unwrap();
        let turns = vec![
            sys_turn(0, vec![SemanticAct::recommend("restaurant", "name", e.name())]),
            sys_turn(1, vec![SemanticAct::recommend("restaurant", "name", wrong.name())]),
            sys_turn(
                2,
                vec![SemanticAct::inform("restaurant", "phone", e.get("phone").unwrap())],
            ),
        ];
        let v = judge_outcome(&o, &g, &turns);
        assert!(!v.inform && !v.success);
    }

    #[test]
    fn nothing_offered_is_not_inform() {
        let o = Ontology::desk();
        let (g, _) = goal_for(&o, 3);
        let v = judge_outcome(&o, &g, &[sys_turn(0, vec![SemanticAct::bye()])]);
        assert!(!v.inform && !v.success);
    }
}
