//! Task reward plus the shifted emotion reward `beta * c(e) - beta`.

use serde::{Deserialize, Serialize};

use crate::episode::RewardBreakdown;
use crate::error::{Error, Result};
use crate::labels::UserEmotion;

/// Where a system decision left the dialogue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TurnOutcome {
    Ongoing,
    Success,
    Failure,
}

/// Terminal reward scheme; exactly one is active.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum TerminalMode {
    /// Fixed success and failure rewards.
    Fixed { success: f64, failure: f64 },
    /// `2T` on success and `-T` on failure, with `T` the turn budget.
    TurnScaled { max_turns: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    pub beta: f64,
    pub turn_penalty: f64,
    pub terminal: TerminalMode,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            beta: 2.0,
            turn_penalty: -1.0,
            terminal: TerminalMode::Fixed {
                success: 80.0,
                failure: -40.0,
            },
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::Config(format!("beta must be non-negative, got {}", self.beta)));
        }
        if let TerminalMode::TurnScaled { max_turns } = self.terminal {
            if max_turns == 0 {
                return Err(Error::Config("turn-scaled terminal needs max_turns > 0".into()));
            }
        }
        Ok(())
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }
}

/// Valence credit: satisfied +1, dissatisfied and abusive -1, anything else 0.
pub fn valence_credit(emotion: UserEmotion) -> f64 {
    match emotion {
        UserEmotion::Satisfied => 1.0,
        UserEmotion::Dissatisfied | UserEmotion::Abusive => -1.0,
        UserEmotion::Neutral
        | UserEmotion::Excited
        | UserEmotion::Fearful
        | UserEmotion::Apologetic => 0.0,
    }
}

/// Never positive, so the policy gains nothing from padding the dialogue.
pub fn emotion_reward(emotion: UserEmotion, config: &RewardConfig) -> f64 {
    config.beta * valence_credit(emotion) - config.beta
}

pub fn task_reward(outcome: TurnOutcome, config: &RewardConfig) -> f64 {
    match (outcome, config.terminal) {
        (TurnOutcome::Ongoing, _) => config.turn_penalty,
        (TurnOutcome::Success, TerminalMode::Fixed { success, .. }) => success,
        (TurnOutcome::Failure, TerminalMode::Fixed { failure, .. }) => failure,
        (TurnOutcome::Success, TerminalMode::TurnScaled { max_turns }) => 2.0 * max_turns as f64,
        (TurnOutcome::Failure, TerminalMode::TurnScaled { max_turns }) => -(max_turns as f64),
    }
}

/// `task + emotion`, computed from the perceived emotion.
pub fn total_reward(outcome: TurnOutcome, perceived: UserEmotion, config: &RewardConfig) -> RewardBreakdown {
    let task = task_reward(outcome, config);
    let emotion = emotion_reward(perceived, config);
    RewardBreakdown {
        task,
        emotion,
        total: task + emotion,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> RewardConfig {
        RewardConfig::default()
    }

    #[test]
    fn emotion_reward_values_at_beta_two() {
        assert_eq!(emotion_reward(UserEmotion::Satisfied, &cfg()), 0.0);
        assert_eq!(emotion_reward(UserEmotion::Neutral, &cfg()), -2.0);
        assert_eq!(emotion_reward(UserEmotion::Dissatisfied, &cfg()), -4.0);
        assert_eq!(emotion_reward(UserEmotion::Abusive, &cfg()), -4.0);
        for e in [UserEmotion::Excited, UserEmotion::Fearful, UserEmotion::Apologetic] {
            assert_eq!(emotion_reward(e, &cfg()), -2.0);
        }
    }

    #[test]
    fn emotion_reward_never_positive() {
        for beta in [0.0, 0.5, 1.0, 2.0, 7.5] {
            for e in UserEmotion::ALL {
                assert!(emotion_reward(e, &cfg().with_beta(beta)) <= 0.0);
            }
        }
    }

    #[test]
    fn task_rewards() {
        assert_eq!(task_reward(TurnOutcome::Ongoing, &cfg()), -1.0);
        assert_eq!(task_reward(TurnOutcome::Success, &cfg()), 80.0);
        assert_eq!(task_reward(TurnOutcome::Failure, &cfg()), -40.0);
        let scaled = RewardConfig {
            terminal: TerminalMode::TurnScaled { max_turns: 20 },
            ..cfg()
        };
        assert_eq!(task_reward(TurnOutcome::Failure, &scaled), -20.0);
        assert_eq!(task_reward(TurnOutcome::Success, &scaled), 40.0);
    }

    #[test]
    fn totals_compose() {
        let t = total_reward(TurnOutcome::Ongoing, UserEmotion::Satisfied, &cfg());
        assert_eq!((t.task, t.emotion, t.total), (-1.0, 0.0, -1.0));
        let t = total_reward(TurnOutcome::Ongoing, UserEmotion::Dissatisfied, &cfg());
        assert_eq!((t.task, t.emotion, t.total), (-1.0, -4.0, -5.0));
        let t = total_reward(TurnOutcome::Success, UserEmotion::Satisfied, &cfg());
        assert_eq!((t.task, t.emotion, t.total), (80.0, 0.0, 80.0));
    }

    #[test]
    fn zero_beta_is_pure_task_reward() {
        let c = cfg().with_beta(0.0);
        for e in UserEmotion::ALL {
            for o in [TurnOutcome::Ongoing, TurnOutcome::Success, TurnOutcome::Failure] {
                assert_eq!(total_reward(o, e, &c).total, task_reward(o, &c));
            }
        }
    }

    #[test]
    fn negative_beta_rejected() {
        assert!(cfg().with_beta(-1.0).validate().is_err());
    }
}
