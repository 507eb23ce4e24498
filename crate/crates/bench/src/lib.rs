//! Shared fixtures for the benchmarks.

use affectloop::policy::{act_mask, feature_dim, featurize, PolicyConfig, PolicyModel, Vocabulary};
use affectloop::{DialogueState, Ontology};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// An untrained policy over the desk ontology.
pub fn fresh_policy(ontology: &Ontology) -> PolicyModel {
    PolicyModel::new(PolicyConfig::default(), Vocabulary::from_ontology(ontology), feature_dim(ontology)).expect("default policy")
}

/// Features and act mask of an opening state.
pub fn opening_state(ontology: &Ontology, model: &PolicyModel) -> (Vec<f64>, Vec<bool>) {
    let state = DialogueState::new(ontology);
    (featurize(&state, ontology, true), act_mask(&model.vocab, &state, ontology))
}

/// `items` rows of `raters` uniform labels over `categories`.
pub fn random_ratings(items: usize, raters: usize, categories: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..items).map(|_| (0..raters).map(|_| rng.gen_range(0..categories)).collect()).collect()
}
