//! Emotion-aware act-sequence policy: featurizer, decoder, behavior cloning
//! and PPO updates.

mod bc;
mod checkpoint;
mod expert;
mod features;
mod lexicalize;
mod model;
mod optim;
mod ppo;
mod vocab;

pub use bc::{clone_behavior, BcConfig, BcExample};
pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use expert::expert_acts;
pub use features::{feature_dim, featurize};
pub use lexicalize::{focus_entity, lexicalize, lexicalize_one};
pub use model::{masked_softmax, Decision, DecodeMode, PolicyConfig, PolicyModel, Trace};
pub use optim::{clip_grad_norm, Adam};
pub use ppo::{build_samples, gae, ppo_loss, ppo_step, update, PpoConfig, PpoSample, Step, Trajectory, UpdateStats};
pub use vocab::{Token, Vocabulary};

use crate::ontology::Ontology;
use crate::understanding::DialogueState;

/// Which vocabulary acts can be lexicalized in `state`.
pub fn act_mask(vocab: &Vocabulary, state: &DialogueState, ontology: &Ontology) -> Vec<bool> {
    (0..vocab.n_acts())
        .map(|i| lexicalize_one(vocab.act(i).expect("act index"), state, ontology).is_some())
        .collect()
}
