//! Closed label sets for user affect and system affective conduct.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Emotion expressed by the user in one turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UserEmotion {
    Neutral,
    Satisfied,
    Dissatisfied,
    Excited,
    Fearful,
    Apologetic,
    Abusive,
}

impl UserEmotion {
    pub const ALL: [UserEmotion; 7] = [
        UserEmotion::Neutral,
        UserEmotion::Satisfied,
        UserEmotion::Dissatisfied,
        UserEmotion::Excited,
        UserEmotion::Fearful,
        UserEmotion::Apologetic,
        UserEmotion::Abusive,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            UserEmotion::Neutral => "neutral",
            UserEmotion::Satisfied => "satisfied",
            UserEmotion::Dissatisfied => "dissatisfied",
            UserEmotion::Excited => "excited",
            UserEmotion::Fearful => "fearful",
            UserEmotion::Apologetic => "apologetic",
            UserEmotion::Abusive => "abusive",
        }
    }

    /// Ordinal valence used by the simulator's one-step shifts.
    /// Abusive < Dissatisfied < Fearful < Neutral = Apologetic < Satisfied < Excited.
    pub fn valence_rank(self) -> u8 {
        match self {
            UserEmotion::Abusive => 0,
            UserEmotion::Dissatisfied => 1,
            UserEmotion::Fearful => 2,
            UserEmotion::Neutral | UserEmotion::Apologetic => 3,
            UserEmotion::Satisfied => 4,
            UserEmotion::Excited => 5,
        }
    }

    pub fn is_negative(self) -> bool {
        self.valence_rank() < 3
    }

    pub fn is_positive(self) -> bool {
        self.valence_rank() > 3
    }
}

impl fmt::Display for UserEmotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for UserEmotion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        Self::ALL
            .iter()
            .copied()
            .find(|e| e.as_str() == lower)
            .ok_or_else(|| Error::Validation(format!("unknown user emotion label {s:?}")))
    }
}

/// Affective conduct of a system turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Conduct {
    Neutral,
    Compassionate,
    Apologetic,
    Enthusiastic,
    Appreciative,
}

impl Conduct {
    pub const ALL: [Conduct; 5] = [
        Conduct::Neutral,
        Conduct::Compassionate,
        Conduct::Apologetic,
        Conduct::Enthusiastic,
        Conduct::Appreciative,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Conduct::Neutral => "neutral",
            Conduct::Compassionate => "compassionate",
            Conduct::Apologetic => "apologetic",
            Conduct::Enthusiastic => "enthusiastic",
            Conduct::Appreciative => "appreciative",
        }
    }

    /// Apologetic and compassionate conduct soften negative reactions.
    pub fn is_soothing(self) -> bool {
        matches!(self, Conduct::Apologetic | Conduct::Compassionate)
    }

    /// Enthusiastic and appreciative conduct amplify positive reactions.
    pub fn is_cheerful(self) -> bool {
        matches!(self, Conduct::Enthusiastic | Conduct::Appreciative)
    }
}

impl fmt::Display for Conduct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Conduct {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.as_str() == lower)
            .ok_or_else(|| Error::Validation(format!("unknown conduct label {s:?}")))
    }
}
