#![allow(dead_code)]

pub mod judge_cases;

use std::collections::BTreeSet;

use affectloop::{Intent, Ontology, SemanticAct, Turn, UserGoal, Verdict};

pub struct LabeledTurn {
    pub utterance: String,
    pub acts: Vec<SemanticAct>,
    pub unlicensed: BTreeSet<String>,
}

fn parse_act(s: &str) -> SemanticAct {
    let mut parts = s.trim().splitn(3, ':');
    let intent = Intent::parse(parts.next().unwrap()).unwrap_or_else(|| panic!("bad intent in {s}"));
    let domain = parts.next().unwrap();
    let mut act = SemanticAct::new(intent, domain);
    if let Some(rest) = parts.next() {
        match rest.split_once('=') {
            Some((slot, value)) => {
                act.slot = Some(slot.into());
                act.value = Some(value.into());
            }
            None => act.slot = Some(rest.into()),
        }
    }
    act
}

pub fn hallucination_fixture() -> Vec<LabeledTurn> {
    include_str!("../fixtures/hallucination.txt")
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let cols: Vec<&str> = l.split('|').map(str::trim).collect();
            assert_eq!(cols.len(), 3, "{l}");
            LabeledTurn {
                utterance: cols[0].to_string(),
                acts: cols[1].split(';').map(parse_act).collect(),
                unlicensed: value_list(cols[2]),
            }
        })
        .collect()
}

/// Straightforward restatement of the judging rules: scan every entity against
/// every act, no indexes.
pub fn oracle_verdict(ontology: &Ontology, goal: &UserGoal, turns: &[Turn]) -> Verdict {
    let mut success = true;
    let mut inform = true;
    for g in &goal.domains {
        let mut constraints = g.constraints.clone();
        if let Some(f) = &g.fallback {
            constraints.insert(f.slot.clone(), f.value.clone());
        }
        let rows = ontology.entities(&g.domain);
        let ok = |i: usize| constraints.iter().all(|(s, v)| rows[i].get(s) == Some(v.as_str()));

        let mut any_offered = false;
        let mut bad_offer = false;
        let mut booked = false;
        let mut details = false;
        let mut told: Vec<&str> = Vec::new();
        for t in turns {
            for a in &t.user_acts {
                if a.domain == g.domain && a.intent == Intent::Inform && matches!(a.slot(), Some("people") | Some("day")) {
                    details = true;
                }
            }
            let Some(sys) = &t.system else { continue };
            for a in &sys.acts {
                if a.domain != g.domain || !matches!(a.intent, Intent::Inform | Intent::Recommend | Intent::Book) {
                    continue;
                }
                let (Some(slot), Some(value)) = (a.slot(), a.value()) else { continue };
                let holders: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].get(slot) == Some(value)).collect();
                if holders.len() == 1 {
                    any_offered = true;
                    bad_offer |= !ok(holders[0]);
                }
                if a.intent == Intent::Inform && holders.iter().any(|&i| ok(i)) {
                    told.push(slot);
                }
                if a.intent == Intent::Book && slot == "name" && details && holders.iter().any(|&i| ok(i)) {
                    booked = true;
                }
            }
        }
        let d_inform = any_offered && !bad_offer;
        inform = inform && d_inform;
        let asked_all = g.requests.iter().all(|r| told.contains(&r.as_str()));
        success = success && d_inform && asked_all && (g.booking.is_none() || booked);
    }
    Verdict { success, inform }
}

pub struct SerCase {
    pub utterance: String,
    pub acts: Vec<SemanticAct>,
    pub missing: BTreeSet<String>,
    pub unlicensed: BTreeSet<String>,
}

fn value_list(col: &str) -> BTreeSet<String> {
    if col == "-" {
        BTreeSet::new()
    } else {
        col.split(',').map(|v| v.trim().to_string()).collect()
    }
}

pub fn ser_fixture() -> Vec<SerCase> {
    include_str!("../fixtures/ser.txt")
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let cols: Vec<&str> = l.split('|').map(str::trim).collect();
            assert_eq!(cols.len(), 4, "{l}");
            SerCase {
                utterance: cols[0].to_string(),
                acts: cols[1].split(';').map(parse_act).collect(),
                missing: value_list(cols[2]),
                unlicensed: value_list(cols[3]),
            }
        })
        .collect()
}
