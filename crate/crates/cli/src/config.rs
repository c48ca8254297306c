//! Layered configuration: TOML file, overridden by flags, echoed to output.

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use patchlab_core::datagen::GenConfig;
use patchlab_core::model::{ModelConfig, TrainConfig};
use patchlab_core::numerics::AdamConfig;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FileConfig {
    pub data: DataSection,
    pub model: ModelSection,
    pub train: TrainSection,
    pub run: RunSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub interchange_per_kind: usize,
    pub entities: Vec<String>,
    pub attributes: Vec<String>,
    pub rules_per_theory: usize,
    pub core_facts: usize,
    pub distractors_min: usize,
    pub distractors_max: usize,
    pub conditional_mix: f64,
}

impl Default for DataSection {
    fn default() -> Self {
        let g = GenConfig::default();
        Self {
            train: g.train,
            val: g.val,
            test: g.test,
            interchange_per_kind: g.interchange_per_kind,
            entities: g.entities,
            attributes: g.attributes,
            rules_per_theory: g.rules_per_theory,
            core_facts: g.core_facts,
            distractors_min: g.distractors_min,
            distractors_max: g.distractors_max,
            conditional_mix: g.conditional_mix,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_model: usize,
    pub d_ff: usize,
    pub max_seq_len: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        let m = ModelConfig::default();
        Self {
            n_layers: m.n_layers,
            n_heads: m.n_heads,
            d_model: m.d_model,
            d_ff: m.d_ff,
            max_seq_len: m.max_seq_len,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub steps: u64,
    pub batch_size: usize,
    pub eval_interval: u64,
    pub lr: f64,
    pub par_chunk: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            steps: t.steps,
            batch_size: t.batch_size,
            eval_interval: t.eval_interval,
            lr: t.optimizer.lr,
            par_chunk: t.par_chunk,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub samples: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { samples: 500 }
    }
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing config {}", p.display()))
            }
        }
    }

    pub fn gen_config(&self, seed: u64) -> GenConfig {
        GenConfig {
            entities: self.data.entities.clone(),
            attributes: self.data.attributes.clone(),
            train: self.data.train,
            val: self.data.val,
            test: self.data.test,
            interchange_per_kind: self.data.interchange_per_kind,
            rules_per_theory: self.data.rules_per_theory,
            core_facts: self.data.core_facts,
            distractors_min: self.data.distractors_min,
            distractors_max: self.data.distractors_max,
            conditional_mix: self.data.conditional_mix,
            max_seq_len: self.model.max_seq_len,
            seed,
        }
    }

    pub fn model_config(&self, vocab_size: usize) -> ModelConfig {
        ModelConfig {
            n_layers: self.model.n_layers,
            n_heads: self.model.n_heads,
            d_model: self.model.d_model,
            d_ff: self.model.d_ff,
            vocab_size,
            max_seq_len: self.model.max_seq_len,
            n_classes: 3,
        }
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            steps: self.train.steps,
            batch_size: self.train.batch_size,
            eval_interval: self.train.eval_interval,
            optimizer: AdamConfig {
                lr: self.train.lr,
                ..AdamConfig::default()
            },
            seed,
            par_chunk: self.train.par_chunk,
        }
    }

    /// Serialize the effective config for echoing and reproduction.
    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }
}
