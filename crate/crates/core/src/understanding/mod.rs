//! System-side perception: dialogue state tracking and user emotion recognition.

mod erc;
mod state;

pub use erc::{EmotionRecognizer, NoiseChannel, RecognizerConfig};
pub use state::{track, DialogueState, DomainState, MatchBucket, HISTORY_LEN};
