//! Emotion cue lexicon shared by the simulated user (which surfaces cues) and
//! the recognizer (which detects them).

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::UserEmotion;
use crate::text::contains_bounded;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CueLexicon {
    /// Surface phrases per emotion, lowercase.
    pub cues: BTreeMap<UserEmotion, Vec<String>>,
    /// Resolution order when several emotions' cues occur in one utterance.
    pub priority: Vec<UserEmotion>,
}

impl Default for CueLexicon {
    fn default() -> Self {
        let table: [(UserEmotion, &[&str]); 6] = [
            (
                UserEmotion::Satisfied,
                &["thanks a lot", "that is great, thank you", "perfect, thanks", "thank you"],
            ),
            (
                UserEmotion::Excited,
                &["i am really excited", "i can't wait", "how wonderful"],
            ),
            (
                UserEmotion::Dissatisfied,
                &[
                    "you are not helping",
                    "that is not what i asked",
                    "this is frustrating",
                ],
            ),
            (
                UserEmotion::Abusive,
                &["what a useless system", "this is ridiculous, you useless machine"],
            ),
            (
                UserEmotion::Fearful,
                &["oh no, that is worrying", "i am really worried now"],
            ),
            (
                UserEmotion::Apologetic,
                &["sorry, my mistake", "apologies, i was unclear"],
            ),
        ];
        let cues = table
            .iter()
            .map(|(e, phrases)| (*e, phrases.iter().map(|p| p.to_string()).collect()))
            .collect();
        Self {
            cues,
            priority: vec![
                UserEmotion::Abusive,
                UserEmotion::Dissatisfied,
                UserEmotion::Fearful,
                UserEmotion::Apologetic,
                UserEmotion::Satisfied,
                UserEmotion::Excited,
            ],
        }
    }
}

impl CueLexicon {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let lex: CueLexicon = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        lex.validate()?;
        Ok(lex)
    }

    pub fn validate(&self) -> Result<()> {
        for (e, phrases) in &self.cues {
            if *e == UserEmotion::Neutral && !phrases.is_empty() {
                return Err(Error::Config("neutral must not carry cue phrases".into()));
            }
            if phrases.iter().any(|p| p.trim().is_empty() || p.to_lowercase() != *p) {
                return Err(Error::Config(format!("cue phrases for {e} must be lowercase and non-empty")));
            }
            if !self.priority.contains(e) {
                return Err(Error::Config(format!("{e} missing from cue priority")));
            }
        }
        Ok(())
    }

    /// Highest-priority emotion whose cue occurs in `utterance`, if any.
    pub fn detect(&self, utterance: &str) -> Option<UserEmotion> {
        let lower = utterance.to_lowercase();
        self.priority.iter().copied().find(|e| {
            self.cues
                .get(e)
                .map(|ps| ps.iter().any(|p| contains_bounded(&lower, p)))
                .unwrap_or(false)
        })
    }

    /// A cue phrase to surface `emotion`, or `None` for neutral.
    pub fn pick<R: Rng + ?Sized>(&self, emotion: UserEmotion, rng: &mut R) -> Option<&str> {
        self.cues
            .get(&emotion)
            .and_then(|ps| ps.choose(rng))
            .map(String::as_str)
    }
}
