use crate::labels::UserEmotion;
use crate::ontology::Ontology;
use crate::understanding::DialogueState;

/// Feature length: per domain, constraint flags + request flags + 4 match
/// buckets + 2 booking flags if bookable + offered + active; then 7 emotions.
pub fn feature_dim(ontology: &Ontology) -> usize {
    ontology
        .domains
        .iter()
        .map(|d| d.constraint_slots().count() + d.requestable.len() + 4 + if d.bookable { 2 } else { 0 } + 2)
        .sum::<usize>()
        + UserEmotion::ALL.len()
}

/// Fixed-length encoding of the emotion-extended state. With `emotion` off
/// the emotion block is all zeros.
pub fn featurize(state: &DialogueState, ontology: &Ontology, emotion: bool) -> Vec<f64> {
    let mut x = Vec::with_capacity(feature_dim(ontology));
    let flag = |b: bool| if b { 1.0 } else { 0.0 };
    for d in &ontology.domains {
        let ds = state.domain(&d.name).expect("state covers ontology");
        for s in d.constraint_slots() {
            x.push(flag(ds.constraints.contains_key(s)));
        }
        for s in &d.requestable {
            x.push(flag(ds.requests.contains(s)));
        }
        let bucket = ds.match_bucket.index();
        for b in 0..4 {
            x.push(flag(b == bucket && !ds.constraints.is_empty()));
        }
        if d.bookable {
            x.push(flag(ds.booking_ready(&d.book_slots)));
            x.push(flag(ds.booked));
        }
        x.push(flag(ds.offered.is_some()));
        x.push(flag(state.active_domain.as_deref() == Some(d.name.as_str())));
    }
    for e in UserEmotion::ALL {
        x.push(flag(emotion && state.perceived_emotion == e));
    }
    x
}
