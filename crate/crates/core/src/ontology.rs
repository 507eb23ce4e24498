//! Domain/slot/value schema and the entity database.
//!
//! The JSON layout is:
//!
//! ```json
//! {
//!   "domains": [
//!     { "name": "restaurant",
//!       "informable": { "area": ["centre", "north"], "name": ["the jade oven"] },
//!       "requestable": ["phone", "address"],
//!       "bookable": true,
//!       "book_slots": { "people": ["1", "2"], "day": ["monday"] } }
//!   ],
//!   "database": { "restaurant": [ { "name": "the jade oven", "area": "centre", "phone": "01223..." } ] }
//! }
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slot that identifies an entity by name.
pub const NAME_SLOT: &str = "name";

const DESK_ONTOLOGY: &str = include_str!("../data/ontology.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSchema {
    pub name: String,
    /// Informable slots with their candidate values.
    pub informable: BTreeMap<String, Vec<String>>,
    pub requestable: Vec<String>,
    pub bookable: bool,
    /// Slots the user must provide before a booking can be made.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub book_slots: BTreeMap<String, Vec<String>>,
}

impl DomainSchema {
    /// Informable slots usable as goal constraints (everything except the name).
    pub fn constraint_slots(&self) -> impl Iterator<Item = &str> {
        self.informable
            .keys()
            .map(String::as_str)
            .filter(|s| *s != NAME_SLOT)
    }

    pub fn is_informable(&self, slot: &str) -> bool {
        self.informable.contains_key(slot)
    }

    pub fn is_requestable(&self, slot: &str) -> bool {
        self.requestable.iter().any(|s| s == slot)
    }

    pub fn is_book_slot(&self, slot: &str) -> bool {
        self.book_slots.contains_key(slot)
    }

    pub fn knows_slot(&self, slot: &str) -> bool {
        self.is_informable(slot) || self.is_requestable(slot) || self.is_book_slot(slot)
    }
}

/// One database row: slot → value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Entity(pub BTreeMap<String, String>);

impl Entity {
    pub fn get(&self, slot: &str) -> Option<&str> {
        self.0.get(slot).map(String::as_str)
    }

    pub fn name(&self) -> &str {
        self.get(NAME_SLOT).unwrap_or("")
    }

    /// True when every constraint is met by this entity.
    pub fn matches(&self, constraints: &BTreeMap<String, String>) -> bool {
        constraints
            .iter()
            .all(|(slot, value)| self.get(slot) == Some(value.as_str()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Ontology {
    pub domains: Vec<DomainSchema>,
    pub database: BTreeMap<String, Vec<Entity>>,
    #[serde(skip)]
    known_values: OnceLock<Vec<String>>,
}

impl PartialEq for Ontology {
    fn eq(&self, other: &Self) -> bool {
        self.domains == other.domains && self.database == other.database
    }
}

impl Ontology {
    pub fn new(domains: Vec<DomainSchema>, database: BTreeMap<String, Vec<Entity>>) -> Result<Self> {
        let ontology = Self {
            domains,
            database,
            known_values: OnceLock::new(),
        };
        ontology.validate()?;
        Ok(ontology)
    }

    /// The bundled three-domain ontology (restaurant, hotel, attraction).
    pub fn desk() -> Self {
        Self::from_json_str(DESK_ONTOLOGY).expect("bundled ontology is valid")
    }

    pub fn from_json_str(json: &str) -> Result<Self> {
        let ontology: Ontology = serde_json::from_str(json)?;
        ontology.validate()?;
        Ok(ontology)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.domains.is_empty() {
            return Err(Error::Config("ontology has no domains".into()));
        }
        let mut names = BTreeSet::new();
        for d in &self.domains {
            if !names.insert(d.name.as_str()) {
                return Err(Error::Config(format!("duplicate domain {:?}", d.name)));
            }
            let mut slots = BTreeSet::new();
            for s in d.informable.keys().chain(&d.requestable).chain(d.book_slots.keys()) {
                if !slots.insert(s.as_str()) {
                    return Err(Error::Config(format!("duplicate slot {s:?} in {}", d.name)));
                }
            }
            let entities = self
                .database
                .get(&d.name)
                .filter(|rows| !rows.is_empty())
                .ok_or_else(|| Error::Config(format!("domain {} has no entities", d.name)))?;
            for (i, e) in entities.iter().enumerate() {
                for (slot, candidates) in &d.informable {
                    if let Some(v) = e.get(slot) {
                        if !candidates.iter().any(|c| c == v) {
                            return Err(Error::Config(format!(
                                "{} entity {i}: value {v:?} not a candidate for slot {slot}",
                                d.name
                            )));
                        }
                    }
                }
            }
        }
        for key in self.database.keys() {
            if !names.contains(key.as_str()) {
                return Err(Error::Config(format!("database domain {key:?} not in schema")));
            }
        }
        Ok(())
    }

    pub fn domain(&self, name: &str) -> Option<&DomainSchema> {
        self.domains.iter().find(|d| d.name == name)
    }

    pub fn domain_index(&self, name: &str) -> Option<usize> {
        self.domains.iter().position(|d| d.name == name)
    }

    pub fn entities(&self, domain: &str) -> &[Entity] {
        self.database.get(domain).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Entities of `domain` satisfying all `constraints`, in database order.
    pub fn matching<'a>(
        &'a self,
        domain: &str,
        constraints: &'a BTreeMap<String, String>,
    ) -> impl Iterator<Item = &'a Entity> + 'a {
        self.entities(domain).iter().filter(move |e| e.matches(constraints))
    }

    pub fn count_matching(&self, domain: &str, constraints: &BTreeMap<String, String>) -> usize {
        self.matching(domain, constraints).count()
    }

    pub fn entity_by_name(&self, domain: &str, name: &str) -> Option<&Entity> {
        self.entities(domain).iter().find(|e| e.name() == name)
    }

    /// Every informable candidate and database value, longest first.
    pub fn known_values(&self) -> &[String] {
        self.known_values.get_or_init(|| {
            let mut set = BTreeSet::new();
            for d in &self.domains {
                for values in d.informable.values() {
                    set.extend(values.iter().cloned());
                }
            }
            for rows in self.database.values() {
                for e in rows {
                    set.extend(e.0.values().cloned());
                }
            }
            let mut values: Vec<String> = set.into_iter().filter(|v| !v.is_empty()).collect();
            values.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
            values
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_ontology_has_three_domains_within_size_bounds() {
        let o = Ontology::desk();
        assert_eq!(o.domains.len(), 3);
        for d in &o.domains {
            let n = o.entities(&d.name).len();
            assert!((30..=60).contains(&n), "{} has {n} entities", d.name);
            assert!((4..=6).contains(&d.informable.len()));
        }
    }

    #[test]
    fn database_values_are_candidates() {
        let o = Ontology::desk();
        for d in &o.domains {
            for e in o.entities(&d.name) {
                for (slot, cands) in &d.informable {
                    assert!(cands.iter().any(|c| Some(c.as_str()) == e.get(slot)));
                }
            }
        }
    }

    #[test]
    fn rejects_value_outside_candidates() {
        let mut o = Ontology::desk();
        o.database.get_mut("restaurant").unwrap()[0]
            .0
            .insert("food".into(), "martian".into());
        assert!(matches!(o.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_empty_ontology() {
        assert!(Ontology::new(vec![], BTreeMap::new()).is_err());
    }

    #[test]
    fn known_values_sorted_longest_first() {
        let o = Ontology::desk();
        let v = o.known_values();
        assert!(v.windows(2).all(|w| w[0].len() >= w[1].len()));
        assert!(v.iter().any(|x| x == "italian"));
    }
}
