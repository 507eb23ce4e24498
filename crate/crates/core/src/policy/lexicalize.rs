use crate::acts::{ActTriple, Intent, SemanticAct};
use crate::ontology::{Entity, Ontology, NAME_SLOT};
use crate::understanding::DialogueState;

/// Entity the system talks about in `domain`: the current offer while it
/// still fits the tracked constraints, otherwise the first match.
pub fn focus_entity<'a>(state: &DialogueState, ontology: &'a Ontology, domain: &str) -> Option<&'a Entity> {
    let ds = state.domain(domain)?;
    if ds.constraints.is_empty() {
        return None;
    }
    if let Some(e) = ds
        .offered
        .as_deref()
        .and_then(|n| ontology.entity_by_name(domain, n))
        .filter(|e| e.matches(&ds.constraints))
    {
        return Some(e);
    }
    ontology.entities(domain).iter().find(|e| e.matches(&ds.constraints))
}

/// Fills values for a decoded triple, or `None` when the state cannot support it.
pub fn lexicalize_one(triple: &ActTriple, state: &DialogueState, ontology: &Ontology) -> Option<SemanticAct> {
    let d = triple.domain.as_str();
    let slot = triple.slot.as_deref();
    match triple.intent {
        Intent::ReqMore | Intent::Bye | Intent::Greet => Some(SemanticAct::new(triple.intent, d)),
        Intent::NoOffer => {
            if state.domain(d)?.constraints.is_empty() {
                return None;
            }
            Some(SemanticAct::new(Intent::NoOffer, d))
        }
        Intent::Request => Some(SemanticAct::request(d, slot?)),
        Intent::Confirm => {
            let v = state.domain(d)?.constraints.get(slot?)?;
            Some(SemanticAct::with_value(Intent::Confirm, d, slot?, v))
        }
        Intent::Inform => {
            let e = focus_entity(state, ontology, d)?;
            Some(SemanticAct::inform(d, slot?, e.get(slot?)?))
        }
        Intent::Recommend => {
            let e = focus_entity(state, ontology, d)?;
            Some(SemanticAct::recommend(d, NAME_SLOT, e.name()))
        }
        Intent::Book => {
            let schema = ontology.domain(d)?;
            if !state.domain(d)?.booking_ready(&schema.book_slots) {
                return None;
            }
            let e = focus_entity(state, ontology, d)?;
            Some(SemanticAct::book(d, e.name()))
        }
    }
}

/// Lexicalizes decoded triples, dropping those the state cannot support.
pub fn lexicalize(triples: &[ActTriple], state: &DialogueState, ontology: &Ontology) -> Vec<SemanticAct> {
    triples
        .iter()
        .filter_map(|t| lexicalize_one(t, state, ontology))
        .collect()
}
