use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::state::DialogueState;
use crate::error::{Error, Result};
use crate::labels::UserEmotion;
use crate::lexicon::CueLexicon;
use crate::text::normalize;

const N: usize = UserEmotion::ALL.len();

/// Row-stochastic confusion matrix applied to the recognizer's decision,
/// indexed `[detected][emitted]` in `UserEmotion::ALL` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct NoiseChannel {
    rows: [[f64; N]; N],
}

impl NoiseChannel {
    pub fn identity() -> Self {
        let mut rows = [[0.0; N]; N];
        for (i, row) in rows.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        Self { rows }
    }

    /// Keeps the label with probability `1 - flip`, otherwise switches to one
    /// of the other labels uniformly.
    pub fn uniform_flip(flip: f64) -> Self {
        let off = flip / (N as f64 - 1.0);
        let mut rows = [[off; N]; N];
        for (i, row) in rows.iter_mut().enumerate() {
            row[i] = 1.0 - flip;
        }
        Self { rows }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() != N || rows.iter().any(|r| r.len() != N) {
            return Err(Error::Config(format!("noise channel must be {N}x{N}")));
        }
        let mut out = [[0.0; N]; N];
        for (i, r) in rows.iter().enumerate() {
            if r.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::Config(format!("row {i} has a negative or non-finite entry")));
            }
            let sum: f64 = r.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!("row {i} sums to {sum}, not 1")));
            }
            out[i].copy_from_slice(r);
        }
        Ok(Self { rows: out })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let rows: Vec<Vec<f64>> = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        Self::from_rows(rows)
    }

    pub fn row(&self, from: UserEmotion) -> &[f64; N] {
        &self.rows[from.index()]
    }

    pub fn prob(&self, from: UserEmotion, to: UserEmotion) -> f64 {
        self.rows[from.index()][to.index()]
    }

    /// Draws the emitted label and returns it with its channel probability.
    pub fn transmit<R: Rng + ?Sized>(&self, label: UserEmotion, rng: &mut R) -> (UserEmotion, f64) {
        let row = self.row(label);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut out = N - 1;
        for (j, p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                out = j;
                break;
            }
        }
        // Guard against rounding pushing past the last non-zero entry.
        while row[out] == 0.0 && out > 0 {
            out -= 1;
        }
        let emitted = UserEmotion::from_index(out).expect("index in range");
        (emitted, row[out])
    }
}

impl TryFrom<Vec<Vec<f64>>> for NoiseChannel {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(rows)
    }
}

impl From<NoiseChannel> for Vec<Vec<f64>> {
    fn from(c: NoiseChannel) -> Self {
        c.rows.iter().map(|r| r.to_vec()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecognizerConfig {
    /// Label an uncued verbatim repetition of a recent utterance as dissatisfied.
    pub repetition_prior: bool,
    pub noise: NoiseChannel,
}

impl Default for RecognizerConfig {
    fn default() -> Self {
        Self {
            repetition_prior: true,
            noise: NoiseChannel::uniform_flip(0.1),
        }
    }
}

/// Cue-lexicon emotion recognizer with context rules and a noise channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmotionRecognizer {
    pub lexicon: CueLexicon,
    pub config: RecognizerConfig,
}

impl EmotionRecognizer {
    pub fn new(lexicon: CueLexicon, config: RecognizerConfig) -> Self {
        Self { lexicon, config }
    }

    /// Recognizer without the noise channel.
    pub fn noiseless(lexicon: CueLexicon) -> Self {
        Self::new(
            lexicon,
            RecognizerConfig {
                noise: NoiseChannel::identity(),
                ..RecognizerConfig::default()
            },
        )
    }

    /// Label decided from cues and context before the noise channel.
    pub fn detect(&self, utterance: &str, history: &[String], _state: &DialogueState) -> UserEmotion {
        if let Some(e) = self.lexicon.detect(utterance) {
            return e;
        }
        if self.config.repetition_prior && !utterance.trim().is_empty() {
            let now = normalize(utterance);
            if history.iter().any(|h| normalize(h) == now) {
                return UserEmotion::Dissatisfied;
            }
        }
        UserEmotion::Neutral
    }

    /// Recognizes the user's emotion; `history` holds the utterances preceding this one.
    pub fn recognize<R: Rng + ?Sized>(
        &self,
        utterance: &str,
        history: &[String],
        state: &DialogueState,
        rng: &mut R,
    ) -> (UserEmotion, f64) {
        let label = self.detect(utterance, history, state);
        self.config.noise.transmit(label, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::Ontology;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn state() -> DialogueState {
        DialogueState::new(&Ontology::desk())
    }

    #[test]
    fn apology_marker_with_identity_channel() {
        let erc = EmotionRecognizer::noiseless(CueLexicon::default());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (e, c) = erc.recognize("Sorry, my mistake, I meant the north.", &[], &state(), &mut rng);
        assert_eq!(e, UserEmotion::Apologetic);
        assert_eq!(c, 1.0);
    }

    #[test]
    fn uncued_flat_context_is_neutral() {
        let erc = EmotionRecognizer::noiseless(CueLexicon::default());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (e, _) = erc.recognize("I need a hotel in the east.", &[], &state(), &mut rng);
        assert_eq!(e, UserEmotion::Neutral);
    }

    #[test]
    fn verbatim_repetition_reads_as_dissatisfied() {
        let erc = EmotionRecognizer::noiseless(CueLexicon::default());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let hist = vec!["What is the phone number?".to_string()];
        let (e, _) = erc.recognize("what is the  phone number?", &hist, &state(), &mut rng);
        assert_eq!(e, UserEmotion::Dissatisfied);
    }

    #[test]
    fn channel_rows_sum_to_one() {
        for ch in [NoiseChannel::identity(), NoiseChannel::uniform_flip(0.1), NoiseChannel::uniform_flip(0.37)] {
            for e in UserEmotion::ALL {
                let s: f64 = ch.row(e).iter().sum();
                assert!((s - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn malformed_channel_rejected() {
        let mut rows = vec![vec![0.0; 7]; 7];
        for (i, r) in rows.iter_mut().enumerate() {
            r[i] = 1.0;
        }
        rows[2][3] = 0.5;
        assert!(NoiseChannel::from_rows(rows).is_err());
        assert!(NoiseChannel::from_rows(vec![vec![1.0]]).is_err());
    }

    #[test]
    fn empirical_emission_matches_matrix_row() {
        // Monte-Carlo frequencies against the Satisfied row of a non-trivial matrix.
        let rows: Vec<Vec<f64>> = (0..7)
            .map(|i| {
                let mut r: Vec<f64> = (0..7).map(|j| 1.0 + ((i * 3 + j * 5) % 7) as f64).collect();
                let s: f64 = r.iter().sum();
                r.iter_mut().for_each(|x| *x /= s);
                r
            })
            .collect();
        let ch = NoiseChannel::from_rows(rows.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 100_000;
        let mut counts = [0usize; 7];
        for _ in 0..n {
            let (e, p) = ch.transmit(UserEmotion::Satisfied, &mut rng);
            assert_eq!(p, ch.prob(UserEmotion::Satisfied, e));
            counts[e.index()] += 1;
        }
        let row = &rows[UserEmotion::Satisfied.index()];
        for j in 0..7 {
            let freq = counts[j] as f64 / n as f64;
            assert!((freq - row[j]).abs() < 0.01, "label {j}: {freq} vs {}", row[j]);
        }
    }

    #[test]
    fn channel_round_trips_through_json() {
        let ch = NoiseChannel::uniform_flip(0.2);
        let json = serde_json::to_string(&ch).unwrap();
        let back: NoiseChannel = serde_json::from_str(&json).unwrap();
        assert_eq!(ch, back);
    }
}
