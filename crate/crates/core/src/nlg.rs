//! Conduct-conditioned template generation and the slot-error checker.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::acts::{Intent, SemanticAct};
use crate::error::{Error, Result};
use crate::labels::Conduct;
use crate::ontology::Ontology;
use crate::text::find_bounded;

/// Surface templates keyed by `intent:domain:slot`, where `*` matches any
/// domain or slot. Placeholders: `{value}`, `{slot}`, `{domain}`, `{a_domain}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateBank {
    pub acts: BTreeMap<String, Vec<String>>,
    pub conduct_phrases: BTreeMap<Conduct, Vec<String>>,
    /// Used when the act list is empty.
    pub fallback: Vec<String>,
}

impl Default for TemplateBank {
    fn default() -> Self {
        let acts: &[(&str, &[&str])] = &[
            ("inform:*:phone", &["The phone number is {value}.", "You can reach them on {value}."]),
            ("inform:*:address", &["The address is {value}.", "It is located at {value}."]),
            ("inform:*:postcode", &["The postcode is {value}.", "Their postcode is {value}."]),
            ("inform:*:*", &["The {slot} is {value}."]),
            ("recommend:*:*", &["I recommend {value}.", "How about {value}?"]),
            ("book:*:*", &["I have booked {value} for you.", "Your booking at {value} is confirmed."]),
            ("request:*:people", &["How many people is the booking for?"]),
            ("request:*:day", &["Which day would you like to book?"]),
            ("request:*:*", &["What {slot} would you like?", "Do you have a preferred {slot}?"]),
            ("nooffer:*:*", &["There is no {domain} matching those criteria.", "I could not find {a_domain} like that."]),
            ("confirm:*:*", &["Just to confirm, you want {slot} {value}?"]),
            ("reqmore:*:*", &["Is there anything else I can help with?"]),
            ("bye:*:*", &["Goodbye, have a nice day."]),
            ("greet:*:*", &["Hello, how can I help you?"]),
        ];
        let phrases: &[(Conduct, &[&str])] = &[
            (Conduct::Neutral, &[]),
            (
                Conduct::Compassionate,
                &["I understand how disappointing that must be. ", "I can see this has been difficult. "],
            ),
            (
                Conduct::Apologetic,
                &["I'm sorry about that. ", "I apologize for the confusion. "],
            ),
            (Conduct::Enthusiastic, &["I'd be happy to help! ", "Sure thing! "]),
            (
                Conduct::Appreciative,
                &["Thank you for your patience. ", "Thanks for bearing with me. "],
            ),
        ];
        Self {
            acts: acts
                .iter()
                .map(|(k, v)| (k.to_string(), v.iter().map(|s| s.to_string()).collect()))
                .collect(),
            conduct_phrases: phrases
                .iter()
                .map(|(c, v)| (*c, v.iter().map(|s| s.to_string()).collect()))
                .collect(),
            fallback: vec!["Could you tell me more about what you need?".into()],
        }
    }
}

impl TemplateBank {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let bank: TemplateBank = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if bank
            .conduct_phrases
            .get(&Conduct::Neutral)
            .map(|p| !p.is_empty())
            .unwrap_or(false)
        {
            return Err(Error::Config("neutral conduct must have no affective phrases".into()));
        }
        Ok(bank)
    }

    fn templates_for(&self, act: &SemanticAct) -> Option<&Vec<String>> {
        let intent = act.intent.as_str();
        let slot = act.slot().unwrap_or("*");
        let d = act.domain.as_str();
        [
            format!("{intent}:{d}:{slot}"),
            format!("{intent}:*:{slot}"),
            format!("{intent}:{d}:*"),
            format!("{intent}:*:*"),
        ]
        .iter()
        .find_map(|k| self.acts.get(k).filter(|v| !v.is_empty()))
    }

    pub fn covers(&self, act: &SemanticAct) -> bool {
        self.templates_for(act).is_some()
    }

    /// Whether `conduct` may be voiced over `acts`: cheerful conduct never
    /// accompanies a no-offer, soothing conduct never accompanies a bare booking.
    pub fn eligible(conduct: Conduct, acts: &[SemanticAct]) -> bool {
        match conduct {
            Conduct::Neutral => true,
            Conduct::Enthusiastic | Conduct::Appreciative => {
                !acts.iter().any(|a| a.intent == Intent::NoOffer)
            }
            Conduct::Apologetic | Conduct::Compassionate => {
                acts.is_empty() || !acts.iter().all(|a| a.intent == Intent::Book)
            }
        }
    }

    /// The conduct actually voiced for `acts`.
    pub fn expressed(conduct: Conduct, acts: &[SemanticAct]) -> Conduct {
        if Self::eligible(conduct, acts) {
            conduct
        } else {
            Conduct::Neutral
        }
    }

    /// Realizes acts with one affective phrase prepended for non-neutral,
    /// eligible conduct.
    pub fn realize<R: Rng + ?Sized>(
        &self,
        acts: &[SemanticAct],
        conduct: Conduct,
        rng: &mut R,
    ) -> Result<String> {
        let mut sentences = Vec::with_capacity(acts.len());
        for act in acts {
            let tpl = self
                .templates_for(act)
                .ok_or_else(|| Error::Realization(act.to_string()))?
                .choose(rng)
                .expect("non-empty template list");
            sentences.push(
                tpl.replace("{value}", act.value().unwrap_or(""))
                    .replace("{slot}", act.slot().unwrap_or(""))
                    .replace("{a_domain}", &crate::goal::with_article(&act.domain))
                    .replace("{domain}", &act.domain),
            );
        }
        if sentences.is_empty() {
            if let Some(f) = self.fallback.choose(rng) {
                sentences.push(f.clone());
            }
        }
        let body = sentences.join(" ");
        if conduct != Conduct::Neutral && Self::eligible(conduct, acts) {
            if let Some(phrase) = self.conduct_phrases.get(&conduct).and_then(|p| p.choose(rng)) {
                return Ok(format!("{phrase}{body}"));
            }
        }
        Ok(body)
    }
}

/// Values an utterance must contain: those carried by value-licensing acts.
pub fn required_values(acts: &[SemanticAct]) -> Vec<String> {
    acts.iter()
        .filter(|a| a.intent.licenses_value())
        .filter_map(|a| a.value().map(str::to_lowercase))
        .collect()
}

/// Known ontology values in `utterance` that no act licenses, longest match first.
pub fn unlicensed_values(utterance: &str, acts: &[SemanticAct], ontology: &Ontology) -> Vec<String> {
    let mut text = utterance.to_lowercase();
    let mut licensed = required_values(acts);
    licensed.sort_by_key(|v| std::cmp::Reverse(v.len()));
    for v in &licensed {
        mask(&mut text, v);
    }
    let mut found = Vec::new();
    for v in ontology.known_values() {
        let v = v.to_lowercase();
        if !find_bounded(&text, &v).is_empty() {
            mask(&mut text, &v);
            found.push(v);
        }
    }
    found
}

/// Required values absent from `utterance`.
pub fn missing_values(utterance: &str, acts: &[SemanticAct]) -> Vec<String> {
    let text = utterance.to_lowercase();
    required_values(acts)
        .into_iter()
        .filter(|v| find_bounded(&text, v).is_empty())
        .collect()
}

fn mask(text: &mut String, value: &str) {
    for start in find_bounded(text, value).into_iter().rev() {
        let fill = "#".repeat(value.len());
        text.replace_range(start..start + value.len(), &fill);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceErrors {
    pub index: usize,
    pub missing: Vec<String>,
    pub unlicensed: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SerReport {
    /// Erroneous utterances over all utterances.
    pub rate: f64,
    pub total: usize,
    pub errors: Vec<UtteranceErrors>,
}

impl SerReport {
    pub fn render_table(&self) -> String {
        let mut out = format!(
            "slot error rate: {:.4} ({} of {} utterances)\n",
            self.rate,
            self.errors.len(),
            self.total
        );
        out.push_str("index  missing                         unlicensed\n");
        for e in &self.errors {
            out.push_str(&format!(
                "{:<6} {:<31} {}\n",
                e.index,
                e.missing.join(","),
                e.unlicensed.join(",")
            ));
        }
        out
    }
}

/// Per-utterance slot error rate.
pub fn slot_error_rate(pairs: &[(String, Vec<SemanticAct>)], ontology: &Ontology) -> SerReport {
    let errors: Vec<UtteranceErrors> = pairs
        .iter()
        .enumerate()
        .filter_map(|(index, (utt, acts))| {
            let missing = missing_values(utt, acts);
            let unlicensed = unlicensed_values(utt, acts, ontology);
            (!missing.is_empty() || !unlicensed.is_empty()).then_some(UtteranceErrors {
                index,
                missing,
                unlicensed,
            })
        })
        .collect();
    let total = pairs.len();
    SerReport {
        rate: if total == 0 { 0.0 } else { errors.len() as f64 / total as f64 },
        total,
        errors,
    }
}
