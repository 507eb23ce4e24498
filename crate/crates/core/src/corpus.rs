//! Annotated-corpus ingestion and annotation analytics.
//!
//! Assumed JSON schema, either a top-level array of dialogues or an object
//! with a `dialogues` array:
//!
//! ```json
//! {"dialogues": [{
//!   "id": "SNG0073",
//!   "source": "multiwoz",
//!   "turns": [
//!     {"speaker": "user", "utterance": "...", "annotations": ["neutral", "neutral", "satisfied"]},
//!     {"speaker": "system", "utterance": "...", "acts": [...], "annotations": ["apologetic", ...], "label": "apologetic"}
//!   ]
//! }]}
//! ```
//!
//! User turns carry emotion labels, system turns conduct labels. `source` is
//! `multiwoz` (default) or `dialmage`; unannotated system turns of machine
//! generated dialogues are labeled neutral automatically.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::acts::SemanticAct;
use crate::error::{Error, Result};
use crate::labels::{Conduct, UserEmotion};
use crate::ontology::Ontology;
use crate::policy::{featurize, BcExample};
use crate::understanding::{track, DialogueState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    User,
    System,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    #[default]
    Multiwoz,
    Dialmage,
}

/// A user emotion or a system conduct label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Label {
    Emotion(UserEmotion),
    Conduct(Conduct),
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Emotion(e) => f.write_str(e.as_str()),
            Label::Conduct(c) => f.write_str(c.as_str()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedTurn {
    pub speaker: Speaker,
    pub utterance: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acts: Option<Vec<SemanticAct>>,
    pub annotations: Vec<Label>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
    /// Label assigned without annotation (machine-generated system turns).
    #[serde(default)]
    pub auto_labeled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedDialogue {
    pub id: String,
    pub source: Source,
    pub turns: Vec<AnnotatedTurn>,
}

fn schema(dialogue: &str, path: String, reason: impl Into<String>) -> Error {
    Error::Schema { dialogue: dialogue.to_owned(), path, reason: reason.into() }
}

fn parse_label(speaker: Speaker, s: &str) -> Option<Label> {
    let q = Value::String(s.to_ascii_lowercase());
    match speaker {
        Speaker::User => serde_json::from_value(q).ok().map(Label::Emotion),
        Speaker::System => serde_json::from_value(q).ok().map(Label::Conduct),
    }
}

fn parse_dialogue(i: usize, v: &Value) -> Result<AnnotatedDialogue> {
    let fallback_id = format!("#{i}");
    let obj = v.as_object().ok_or_else(|| schema(&fallback_id, "$".into(), "dialogue must be an object"))?;
    let id = match obj.get("id") {
        Some(Value::String(s)) => s.clone(),
        _ => return Err(schema(&fallback_id, "id".into(), "missing or non-string id")),
    };
    let source = match obj.get("source") {
        None => Source::Multiwoz,
        Some(s) => serde_json::from_value(s.clone()).map_err(|_| schema(&id, "source".into(), format!("unknown source {s}")))?,
    };
    let turns_v = obj
        .get("turns")
        .and_then(Value::as_array)
        .ok_or_else(|| schema(&id, "turns".into(), "missing turns array"))?;
    let mut turns = Vec::with_capacity(turns_v.len());
    for (t, tv) in turns_v.iter().enumerate() {
        let at = |field: &str| format!("turns[{t}].{field}");
        let to = tv.as_object().ok_or_else(|| schema(&id, format!("turns[{t}]"), "turn must be an object"))?;
        let speaker: Speaker = to
            .get("speaker")
            .and_then(|s| serde_json::from_value(s.clone()).ok())
            .ok_or_else(|| schema(&id, at("speaker"), "speaker must be \"user\" or \"system\""))?;
        let utterance = to
            .get("utterance")
            .and_then(Value::as_str)
            .ok_or_else(|| schema(&id, at("utterance"), "missing utterance"))?
            .to_owned();
        let acts = match to.get("acts") {
            None | Some(Value::Null) => None,
            Some(a) => Some(
                serde_json::from_value::<Vec<SemanticAct>>(a.clone())
                    .map_err(|e| schema(&id, at("acts"), e.to_string()))?,
            ),
        };
        let mut annotations = Vec::new();
        if let Some(a) = to.get("annotations") {
            let arr = a.as_array().ok_or_else(|| schema(&id, at("annotations"), "annotations must be an array"))?;
            for (k, l) in arr.iter().enumerate() {
                let s = l.as_str().ok_or_else(|| schema(&id, format!("turns[{t}].annotations[{k}]"), "label must be a string"))?;
                annotations.push(
                    parse_label(speaker, s)
                        .ok_or_else(|| schema(&id, format!("turns[{t}].annotations[{k}]"), format!("invalid label {s:?}")))?,
                );
            }
        }
        let label = match to.get("label") {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => {
                Some(parse_label(speaker, s).ok_or_else(|| schema(&id, at("label"), format!("invalid label {s:?}")))?)
            }
            Some(_) => return Err(schema(&id, at("label"), "label must be a string")),
        };
        if label.is_some() && annotations.len() < 3 {
            return Err(schema(&id, at("label"), "final label needs at least three annotations"));
        }
        turns.push(AnnotatedTurn { speaker, utterance, acts, annotations, label, auto_labeled: false });
    }
    let mut d = AnnotatedDialogue { id, source, turns };
    if d.source == Source::Dialmage {
        for t in d.turns.iter_mut().filter(|t| t.speaker == Speaker::System && t.annotations.is_empty()) {
            t.label = Some(Label::Conduct(Conduct::Neutral));
            t.auto_labeled = true;
        }
    }
    Ok(d)
}

/// Parses corpus text; an empty or whitespace-only input is an empty corpus.
pub fn parse_corpus(text: &str) -> Result<Vec<AnnotatedDialogue>> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let root: Value = serde_json::from_str(text)?;
    let list = match &root {
        Value::Array(a) => a,
        Value::Object(o) => o
            .get("dialogues")
            .and_then(Value::as_array)
            .ok_or_else(|| schema("", "dialogues".into(), "expected a dialogues array"))?,
        _ => return Err(schema("", "$".into(), "expected an array or an object")),
    };
    list.iter().enumerate().map(|(i, v)| parse_dialogue(i, v)).collect()
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<AnnotatedDialogue>> {
    parse_corpus(&std::fs::read_to_string(path)?)
}

/// Aggregation result for one turn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Vote<T> {
    Final(T),
    /// No majority among three; ask a fourth annotator.
    NeedsAnnotator,
    /// Still tied after extra annotators; decide by hand.
    NeedsManual,
}

/// Strict majority, or with four or more labels a unique plurality.
pub fn majority_vote<T: Ord + Clone>(labels: &[T]) -> Result<Vote<T>> {
    if labels.len() < 3 {
        return Err(Error::InsufficientAnnotations(labels.len()));
    }
    let mut counts: BTreeMap<&T, usize> = BTreeMap::new();
    for l in labels {
        *counts.entry(l).or_default() += 1;
    }
    let top = *counts.values().max().expect("non-empty");
    let leaders: Vec<&T> = counts.iter().filter(|(_, &c)| c == top).map(|(l, _)| *l).collect();
    if 2 * top > labels.len() {
        return Ok(Vote::Final(leaders[0].clone()));
    }
    if labels.len() == 3 {
        return Ok(Vote::NeedsAnnotator);
    }
    if leaders.len() == 1 {
        Ok(Vote::Final(leaders[0].clone()))
    } else {
        Ok(Vote::NeedsManual)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Finalization {
    pub finalized: usize,
    pub auto_labeled: usize,
    /// (dialogue id, turn index) pairs left without a label.
    pub needs_annotator: Vec<(String, usize)>,
    pub needs_manual: Vec<(String, usize)>,
}

/// Fills in missing final labels by majority vote.
pub fn finalize(corpus: &mut [AnnotatedDialogue]) -> Finalization {
    let mut rep = Finalization::default();
    for d in corpus.iter_mut() {
        for (i, t) in d.turns.iter_mut().enumerate() {
            if t.auto_labeled {
                rep.auto_labeled += 1;
                continue;
            }
            if t.label.is_some() {
                rep.finalized += 1;
                continue;
            }
            match majority_vote(&t.annotations) {
                Ok(Vote::Final(l)) => {
                    t.label = Some(l);
                    rep.finalized += 1;
                }
                Ok(Vote::NeedsAnnotator) => rep.needs_annotator.push((d.id.clone(), i)),
                Ok(Vote::NeedsManual) => rep.needs_manual.push((d.id.clone(), i)),
                Err(_) => {}
            }
        }
    }
    rep
}

/// Fleiss' kappa from per-item category counts; every row must sum to the
/// same number of raters, at least two.
pub fn fleiss_kappa_counts(counts: &[Vec<usize>]) -> Result<f64> {
    let Some(first) = counts.first() else {
        return Err(Error::UndefinedMetric("kappa over zero items".into()));
    };
    let n: usize = first.iter().sum();
    let k = first.len();
    if n < 2 {
        return Err(Error::UndefinedMetric("kappa needs at least two ratings per item".into()));
    }
    if let Some(i) = counts.iter().position(|r| r.len() != k || r.iter().sum::<usize>() != n) {
        return Err(Error::Validation(format!("item {i} does not have {n} ratings over {k} categories")));
    }
    let items = counts.len() as f64;
    let nf = n as f64;
    let mut p_j = vec![0.0; k];
    let mut p_bar = 0.0;
    for row in counts {
        let mut agree = 0.0;
        for (j, &c) in row.iter().enumerate() {
            p_j[j] += c as f64;
            agree += (c * c.saturating_sub(1)) as f64;
        }
        p_bar += agree / (nf * (nf - 1.0));
    }
    p_bar /= items;
    let p_e: f64 = p_j.iter().map(|s| (s / (items * nf)).powi(2)).sum();
    if (1.0 - p_e).abs() < 1e-12 {
        return Err(Error::Degenerate("only one category observed, chance agreement is 1".into()));
    }
    Ok((p_bar - p_e) / (1.0 - p_e))
}

/// Fleiss' kappa from an item × rater label matrix over `categories`.
/// Ragged rows are truncated to the shortest row's first ratings.
pub fn fleiss_kappa<T: PartialEq>(ratings: &[Vec<T>], categories: &[T]) -> Result<f64> {
    let m = ratings.iter().map(Vec::len).min().unwrap_or(0);
    let mut counts = Vec::with_capacity(ratings.len());
    for (i, row) in ratings.iter().enumerate() {
        let mut c = vec![0usize; categories.len()];
        for r in &row[..m] {
            let j = categories
                .iter()
                .position(|x| x == r)
                .ok_or_else(|| Error::Validation(format!("item {i} has a label outside the category set")))?;
            c[j] += 1;
        }
        counts.push(c);
    }
    fleiss_kappa_counts(&counts)
}

/// Turn-position buckets, inclusive lower bounds; the last bucket is open.
pub const DEFAULT_TURN_BUCKETS: [usize; 4] = [0, 3, 6, 9];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketDistribution {
    pub bucket: String,
    pub count: usize,
    pub proportions: BTreeMap<Conduct, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConductReport {
    pub count: usize,
    pub counts: BTreeMap<Conduct, usize>,
    pub proportions: BTreeMap<Conduct, f64>,
    /// Present when requested, keyed by system-turn position.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub by_turn: Vec<BucketDistribution>,
    /// Turns whose label came from the machine-generated rule.
    pub auto_labeled: usize,
}

fn bucket_name(buckets: &[usize], b: usize) -> String {
    match buckets.get(b + 1) {
        Some(&hi) => format!("{}-{}", buckets[b], hi - 1),
        None => format!("{}+", buckets[b]),
    }
}

fn proportions(counts: &BTreeMap<Conduct, usize>) -> BTreeMap<Conduct, f64> {
    let total: usize = counts.values().sum();
    counts.iter().map(|(&c, &n)| (c, n as f64 / total as f64)).collect()
}

/// Distribution of final conduct labels over system turns, optionally split by
/// the system turn's ordinal position using `buckets`.
pub fn conduct_distribution(corpus: &[AnnotatedDialogue], buckets: Option<&[usize]>) -> Result<ConductReport> {
    let mut counts = BTreeMap::new();
    let mut per_bucket: Vec<BTreeMap<Conduct, usize>> = vec![BTreeMap::new(); buckets.map_or(0, <[usize]>::len)];
    let mut auto = 0;
    for d in corpus {
        let system_turns = d.turns.iter().filter(|t| t.speaker == Speaker::System);
        for (pos, t) in system_turns.enumerate() {
            let Some(Label::Conduct(c)) = t.label else { continue };
            *counts.entry(c).or_insert(0usize) += 1;
            auto += usize::from(t.auto_labeled);
            if let Some(b) = buckets {
                if let Some(k) = b.iter().rposition(|&lo| pos >= lo) {
                    *per_bucket[k].entry(c).or_insert(0) += 1;
                }
            }
        }
    }
    let count: usize = counts.values().sum();
    if count == 0 {
        return Err(Error::EmptyReport("no finalized conduct labels".into()));
    }
    let by_turn = match buckets {
        None => Vec::new(),
        Some(b) => per_bucket
            .iter()
            .enumerate()
            .filter(|(_, m)| !m.is_empty())
            .map(|(k, m)| BucketDistribution {
                bucket: bucket_name(b, k),
                count: m.values().sum(),
                proportions: proportions(m),
            })
            .collect(),
    };
    Ok(ConductReport { count, proportions: proportions(&counts), counts, by_turn, auto_labeled: auto })
}

impl ConductReport {
    pub fn render(&self) -> String {
        let mut out = format!("{:<14} {:>8} {:>8}\n", "Conduct", "Count", "Share");
        for (c, n) in &self.counts {
            out += &format!("{:<14} {:>8} {:>7.1}%\n", c.as_str(), n, 100.0 * self.proportions[c]);
        }
        for b in &self.by_turn {
            out += &format!("\nturns {} (n={})\n", b.bucket, b.count);
            for (c, p) in &b.proportions {
                out += &format!("  {:<12} {:>7.1}%\n", c.as_str(), 100.0 * p);
            }
        }
        out
    }
}

/// Cloning examples from dialogues with user and system acts. The perceived
/// emotion of each state is the final label of the preceding user turn.
pub fn bc_examples(corpus: &[AnnotatedDialogue], ontology: &Ontology) -> Result<Vec<BcExample>> {
    let mut out = Vec::new();
    for d in corpus {
        let mut state = DialogueState::new(ontology);
        for (i, t) in d.turns.iter().enumerate() {
            let acts = t
                .acts
                .as_ref()
                .ok_or_else(|| schema(&d.id, format!("turns[{i}].acts"), "cloning export needs acts on every turn"))?;
            match t.speaker {
                Speaker::User => {
                    state = track(&state, acts, ontology)
                        .map_err(|e| schema(&d.id, format!("turns[{i}].acts"), e.to_string()))?;
                    if let Some(Label::Emotion(e)) = t.label {
                        state.perceived_emotion = e;
                    }
                    state.remember(&t.utterance);
                }
                Speaker::System => {
                    let conduct = match t.label {
                        Some(Label::Conduct(c)) => c,
                        _ => Conduct::Neutral,
                    };
                    out.push(BcExample {
                        features: featurize(&state, ontology, true),
                        acts: acts.iter().map(SemanticAct::triple).collect(),
                        conduct,
                        act_mask: None,
                    });
                    state.record_system_acts(acts, ontology);
                }
            }
        }
    }
    Ok(out)
}
