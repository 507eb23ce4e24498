//! Emotion-aware task-oriented dialogue: tracking, recognition, policy learning,
//! conduct-conditioned generation, user simulation and evaluation.

pub mod acts;
pub mod corpus;
pub mod episode;
pub mod eval;
pub mod error;
pub mod goal;
pub mod labels;
pub mod lexicon;
pub mod nlg;
pub mod policy;
pub mod ontology;
pub mod reward;
pub mod text;
pub mod trainer;
pub mod trial;
pub mod understanding;
pub mod usersim;

pub use acts::{ActTriple, Intent, SemanticAct, GENERAL_DOMAIN};
pub use episode::{judge_outcome, EpisodeMeta, EpisodeRecord, Outcome, RewardBreakdown, SystemTurn, Turn, Verdict};
pub use error::{Error, Result};
pub use goal::{sample_goal, DomainGoal, GoalConfig, UserGoal};
pub use labels::{Conduct, UserEmotion};
pub use lexicon::CueLexicon;
pub use nlg::TemplateBank;
pub use ontology::{DomainSchema, Entity, Ontology};
pub use reward::{RewardConfig, TerminalMode, TurnOutcome};
pub use trainer::{train, Ablation, Modules, TrainConfig};
pub use understanding::{DialogueState, EmotionRecognizer, NoiseChannel, RecognizerConfig};
