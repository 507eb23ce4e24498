use std::collections::BTreeSet;

use crate::acts::{ActTriple, Intent, GENERAL_DOMAIN};
use crate::ontology::{Ontology, NAME_SLOT};
use crate::understanding::{DialogueState, MatchBucket};

/// Hand-written task policy: answer what the user just asked for.
pub fn expert_acts(state: &DialogueState, ontology: &Ontology) -> Vec<ActTriple> {
    let mut domains: Vec<&str> = Vec::new();
    for a in &state.last_user_acts {
        if a.domain != GENERAL_DOMAIN && !domains.contains(&a.domain.as_str()) {
            domains.push(&a.domain);
        }
    }
    if domains.is_empty() {
        if let Some(d) = state.active_domain.as_deref() {
            domains.push(d);
        }
    }
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    let mut push = |t: ActTriple, out: &mut Vec<ActTriple>| {
        if seen.insert(t.clone()) {
            out.push(t);
        }
    };
    for d in domains {
        let (Some(schema), Some(ds)) = (ontology.domain(d), state.domain(d)) else {
            continue;
        };
        if ds.constraints.is_empty() {
            continue;
        }
        if ds.match_bucket == MatchBucket::Zero {
            push(ActTriple::new(Intent::NoOffer, d, None), &mut out);
            continue;
        }
        if ds.offered.is_none() {
            push(ActTriple::new(Intent::Recommend, d, Some(NAME_SLOT)), &mut out);
        }
        for r in &ds.requests {
            push(ActTriple::new(Intent::Inform, d, Some(r)), &mut out);
        }
        if schema.bookable && ds.booking_ready(&schema.book_slots) && !ds.booked {
            push(ActTriple::new(Intent::Book, d, Some(NAME_SLOT)), &mut out);
        }
    }
    if out.is_empty() {
        out.push(ActTriple::new(Intent::ReqMore, GENERAL_DOMAIN, None));
    }
    out
}
