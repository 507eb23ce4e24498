//! User goals and goal sampling.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ontology::{Ontology, NAME_SLOT};

/// Alternative value the user falls back to once told their first choice does not exist.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relaxation {
    pub slot: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainGoal {
    pub domain: String,
    pub constraints: BTreeMap<String, String>,
    pub requests: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub booking: Option<BTreeMap<String, String>>,
    /// Set when `constraints` deliberately match no entity.
    #[serde(default)]
    pub unsatisfiable: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback: Option<Relaxation>,
}

impl DomainGoal {
    /// Constraints after the fallback (if any) has been applied.
    pub fn effective_constraints(&self) -> BTreeMap<String, String> {
        let mut c = self.constraints.clone();
        if let Some(r) = &self.fallback {
            c.insert(r.slot.clone(), r.value.clone());
        }
        c
    }
}

/// The task of one dialogue, domains in the order the user pursues them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserGoal {
    pub domains: Vec<DomainGoal>,
}

impl UserGoal {
    pub fn domain(&self, name: &str) -> Option<&DomainGoal> {
        self.domains.iter().find(|d| d.domain == name)
    }

    pub fn domain_order(&self) -> Vec<&str> {
        self.domains.iter().map(|d| d.domain.as_str()).collect()
    }

    /// Checks the slot-kind invariants against an ontology.
    pub fn validate(&self, ontology: &Ontology) -> Result<()> {
        if self.domains.is_empty() {
            return Err(Error::Validation("goal has no domains".into()));
        }
        for g in &self.domains {
            let schema = ontology
                .domain(&g.domain)
                .ok_or_else(|| Error::Validation(format!("unknown goal domain {}", g.domain)))?;
            for slot in g.constraints.keys() {
                if !schema.is_informable(slot) {
                    return Err(Error::Validation(format!("{slot} is not informable")));
                }
            }
            for slot in &g.requests {
                if !schema.is_requestable(slot) {
                    return Err(Error::Validation(format!("{slot} is not requestable")));
                }
            }
            let matches = ontology.count_matching(&g.domain, &g.constraints);
            if (matches == 0) != g.unsatisfiable {
                return Err(Error::Validation(format!(
                    "{} goal satisfiability flag disagrees with database ({matches} matches)",
                    g.domain
                )));
            }
        }
        Ok(())
    }

    /// Human-readable instructions for a trial participant.
    pub fn render_instructions(&self) -> String {
        let mut out = String::new();
        for (i, g) in self.domains.iter().enumerate() {
            let lead = if i == 0 { "You are looking for" } else { "You also need" };
            let _ = write!(out, "{lead} {}", with_article(&g.domain));
            let parts: Vec<String> = g
                .constraints
                .iter()
                .map(|(s, v)| format!("{s} {v}"))
                .collect();
            if !parts.is_empty() {
                let _ = write!(out, " with {}", parts.join(", "));
            }
            out.push('.');
            if let Some(r) = &g.fallback {
                let _ = write!(
                    out,
                    " If there is no such {}, try {} {} instead.",
                    g.domain, r.slot, r.value
                );
            }
            if !g.requests.is_empty() {
                let req: Vec<&str> = g.requests.iter().map(String::as_str).collect();
                let _ = write!(out, " Ask for the {}.", req.join(", "));
            }
            if let Some(b) = &g.booking {
                let people = b.get("people").map(String::as_str).unwrap_or("?");
                let day = b.get("day").map(String::as_str).unwrap_or("?");
                let _ = write!(out, " Book it for {people} people on {day}.");
            }
            out.push('\n');
        }
        out.push_str("Please use these exact entity terms when you talk to the system.");
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GoalConfig {
    pub multi_domain_probability: f64,
    pub unsatisfiable_probability: f64,
    pub booking_probability: f64,
    pub min_constraints: usize,
    pub max_constraints: usize,
    pub max_requests: usize,
}

impl Default for GoalConfig {
    fn default() -> Self {
        Self {
            multi_domain_probability: 0.3,
            unsatisfiable_probability: 0.1,
            booking_probability: 0.5,
            min_constraints: 2,
            max_constraints: 3,
            max_requests: 2,
        }
    }
}

impl GoalConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("multi_domain_probability", self.multi_domain_probability),
            ("unsatisfiable_probability", self.unsatisfiable_probability),
            ("booking_probability", self.booking_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} = {p} is outside [0, 1]")));
            }
        }
        if self.min_constraints == 0 || self.min_constraints > self.max_constraints {
            return Err(Error::Config("constraint count bounds are inconsistent".into()));
        }
        if self.max_requests == 0 {
            return Err(Error::Config("max_requests must be at least 1".into()));
        }
        Ok(())
    }
}

/// Samples a single- or multi-domain goal.
pub fn sample_goal<R: Rng + ?Sized>(
    ontology: &Ontology,
    rng: &mut R,
    config: &GoalConfig,
) -> Result<UserGoal> {
    config.validate()?;
    if ontology.domains.is_empty() {
        return Err(Error::Config("cannot sample a goal from an empty ontology".into()));
    }
    let multi = ontology.domains.len() > 1 && rng.gen::<f64>() < config.multi_domain_probability;
    let unsat = rng.gen::<f64>() < config.unsatisfiable_probability;
    let mut order: Vec<usize> = (0..ontology.domains.len()).collect();
    order.shuffle(rng);
    order.truncate(if multi { 2 } else { 1 });

    let mut domains = Vec::with_capacity(order.len());
    for (pos, &di) in order.iter().enumerate() {
        let want_unsat = unsat && pos == 0;
        domains.push(sample_domain_goal(ontology, di, want_unsat, rng, config)?);
    }
    Ok(UserGoal { domains })
}

fn sample_domain_goal<R: Rng + ?Sized>(
    ontology: &Ontology,
    domain_index: usize,
    unsatisfiable: bool,
    rng: &mut R,
    config: &GoalConfig,
) -> Result<DomainGoal> {
    let schema = &ontology.domains[domain_index];
    let entities = ontology.entities(&schema.name);
    let slots: Vec<&str> = schema.constraint_slots().collect();
    let hi = config.max_constraints.min(slots.len()).max(1);
    let lo = config.min_constraints.min(hi);

    let (constraints, fallback) = if unsatisfiable {
        build_unsatisfiable(ontology, domain_index, &slots, lo.max(2).min(hi), hi, rng)?
    } else {
        let entity = entities
            .choose(rng)
            .ok_or_else(|| Error::Config(format!("domain {} has no entities", schema.name)))?;
        let k = rng.gen_range(lo..=hi);
        let mut chosen = slots.clone();
        chosen.shuffle(rng);
        let constraints = chosen[..k]
            .iter()
            .filter_map(|s| entity.get(s).map(|v| ((*s).to_owned(), v.to_owned())))
            .collect();
        (constraints, None)
    };

    let mut requestable = schema.requestable.clone();
    requestable.shuffle(rng);
    let n_req = rng.gen_range(1..=config.max_requests.min(requestable.len()).max(1));
    let requests = requestable.into_iter().take(n_req).collect();

    let booking = if schema.bookable
        && !schema.book_slots.is_empty()
        && rng.gen::<f64>() < config.booking_probability
    {
        Some(
            schema
                .book_slots
                .iter()
                .filter_map(|(slot, cands)| cands.choose(rng).map(|v| (slot.clone(), v.clone())))
                .collect(),
        )
    } else {
        None
    };

    Ok(DomainGoal {
        domain: schema.name.clone(),
        constraints,
        requests,
        booking,
        unsatisfiable: fallback.is_some(),
        fallback,
    })
}

/// Starts from a real entity and perturbs one constraint so nothing matches;
/// the entity's own value becomes the fallback.
fn build_unsatisfiable<R: Rng + ?Sized>(
    ontology: &Ontology,
    domain_index: usize,
    slots: &[&str],
    lo: usize,
    hi: usize,
    rng: &mut R,
) -> Result<(BTreeMap<String, String>, Option<Relaxation>)> {
    let schema = &ontology.domains[domain_index];
    let entities = ontology.entities(&schema.name);
    if slots.len() < 2 {
        return Err(Error::Config(format!(
            "domain {} needs two constraint slots for an unsatisfiable goal",
            schema.name
        )));
    }
    for _ in 0..entities.len() * 4 {
        let entity = entities.choose(rng).expect("non-empty database");
        let k = rng.gen_range(lo..=hi);
        let mut chosen: Vec<&str> = slots.to_vec();
        chosen.shuffle(rng);
        chosen.truncate(k);
        let base: BTreeMap<String, String> = chosen
            .iter()
            .filter_map(|s| entity.get(s).map(|v| ((*s).to_owned(), v.to_owned())))
            .collect();

        let mut candidates: Vec<(&str, &str)> = Vec::new();
        for slot in &chosen {
            for v in &schema.informable[*slot] {
                if Some(v.as_str()) != entity.get(slot) {
                    candidates.push((slot, v));
                }
            }
        }
        candidates.shuffle(rng);
        for (slot, v) in candidates {
            let mut c = base.clone();
            c.insert(slot.to_owned(), v.to_owned());
            if ontology.count_matching(&schema.name, &c) == 0 {
                let relax = Relaxation {
                    slot: slot.to_owned(),
                    value: base[slot].clone(),
                };
                return Ok((c, Some(relax)));
            }
        }
    }
    Err(Error::Config(format!(
        "could not construct an unsatisfiable goal for {}",
        schema.name
    )))
}

/// Names of entities the fallback-relaxed goal would accept.
pub fn acceptable_entities<'a>(ontology: &'a Ontology, goal: &DomainGoal) -> Vec<&'a str> {
    let c = goal.effective_constraints();
    ontology
        .entities(&goal.domain)
        .iter()
        .filter(|e| e.matches(&c))
        .map(|e| e.get(NAME_SLOT).unwrap_or(""))
        .collect()
}

/// `word` preceded by "a" or "an".
pub(crate) fn with_article(word: &str) -> String {
    let article = if word.starts_with(['a', 'e', 'i', 'o', 'u']) { "an" } else { "a" };
    format!("{article} {word}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn single_domain_when_multi_probability_is_zero() {
        let o = Ontology::desk();
        let cfg = GoalConfig {
            multi_domain_probability: 0.0,
            ..GoalConfig::default()
        };
        let mut r = rng(1);
        for _ in 0..200 {
            let g = sample_goal(&o, &mut r, &cfg).unwrap();
            assert_eq!(g.domains.len(), 1);
            g.validate(&o).unwrap();
        }
    }

    #[test]
    fn forced_unsatisfiable_goal_matches_nothing_by_exhaustive_scan() {
        let o = Ontology::desk();
        let cfg = GoalConfig {
            unsatisfiable_probability: 1.0,
            ..GoalConfig::default()
        };
        let mut r = rng(7);
        for _ in 0..200 {
            let g = sample_goal(&o, &mut r, &cfg).unwrap();
            let first = &g.domains[0];
            // brute-force scan, independent of Ontology::matching
            let hits = o.database[&first.domain]
                .iter()
                .filter(|e| {
                    first
                        .constraints
                        .iter()
                        .all(|(s, v)| e.0.get(s).map(|x| x == v).unwrap_or(false))
                })
                .count();
            assert_eq!(hits, 0);
            assert!(first.unsatisfiable);
            assert!(!acceptable_entities(&o, first).is_empty());
        }
    }

    #[test]
    fn sampling_is_reproducible_under_seed() {
        let o = Ontology::desk();
        let cfg = GoalConfig::default();
        let a: Vec<_> = (0..50)
            .scan(rng(42), |r, _| Some(sample_goal(&o, r, &cfg).unwrap()))
            .collect();
        let b: Vec<_> = (0..50)
            .scan(rng(42), |r, _| Some(sample_goal(&o, r, &cfg).unwrap()))
            .collect();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_out_of_range_probability() {
        let o = Ontology::desk();
        let cfg = GoalConfig {
            multi_domain_probability: 1.5,
            ..GoalConfig::default()
        };
        assert!(matches!(
            sample_goal(&o, &mut rng(0), &cfg),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn instructions_mention_constraints_and_requests() {
        let o = Ontology::desk();
        let g = sample_goal(&o, &mut rng(3), &GoalConfig::default()).unwrap();
        let text = g.render_instructions();
        for d in &g.domains {
            for v in d.constraints.values() {
                assert!(text.contains(v.as_str()));
            }
            for r in &d.requests {
                assert!(text.contains(r.as_str()));
            }
        }
    }
}
