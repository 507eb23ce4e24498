use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{PolicyConfig, PolicyModel};
use super::vocab::Vocabulary;
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

/// JSON parameter dump of a policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config_hash: String,
    /// Training dialogues seen when the checkpoint was taken.
    pub dialogues: usize,
    pub policy: PolicyConfig,
    pub vocabulary: Vec<String>,
    pub feature_dim: usize,
    pub params: Vec<f64>,
}

impl Checkpoint {
    pub fn of(model: &PolicyModel, config_hash: &str, dialogues: usize) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            config_hash: config_hash.to_owned(),
            dialogues,
            policy: model.config.clone(),
            vocabulary: model.vocab.names(),
            feature_dim: model.feature_dim(),
            params: model.params.clone(),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_slice(&std::fs::read(path)?)?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!("unsupported checkpoint version {}", ck.version)));
        }
        Ok(ck)
    }

    /// Rebuilds the model against `vocab`, which must match the stored one.
    pub fn restore(&self, vocab: Vocabulary) -> Result<PolicyModel> {
        if vocab.names() != self.vocabulary {
            return Err(Error::Config("checkpoint vocabulary does not match the ontology".into()));
        }
        let mut m = PolicyModel::new(self.policy.clone(), vocab, self.feature_dim)?;
        if m.params.len() != self.params.len() {
            return Err(Error::Config(format!(
                "checkpoint holds {} parameters, model needs {}",
                self.params.len(),
                m.params.len()
            )));
        }
        m.params.clone_from(&self.params);
        Ok(m)
    }
}
