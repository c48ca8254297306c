//! Transformer hyperparameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const N_CLASSES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_model: usize,
    pub d_ff: usize,
    pub vocab_size: usize,
    pub max_seq_len: usize,
    pub n_classes: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            n_layers: 8,
            n_heads: 4,
            d_model: 128,
            d_ff: 512,
            vocab_size: 0, // filled from the dataset vocabulary
            max_seq_len: 128,
            n_classes: N_CLASSES,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_layers == 0
            || self.n_heads == 0
            || self.d_model == 0
            || self.d_ff == 0
            || self.vocab_size == 0
            || self.max_seq_len == 0
        {
            return Err(Error::Config("model dimensions must be positive".into()));
        }
        if self.d_model % self.n_heads != 0 {
            return Err(Error::Config(format!(
                "d_model {} not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if self.n_classes != N_CLASSES {
            return Err(Error::Config(format!(
                "n_classes is fixed at {N_CLASSES} (True/False/Unknown)"
            )));
        }
        Ok(())
    }

    /// Total parameter count; a pure function of the config.
    pub fn param_count(&self) -> usize {
        let d = self.d_model;
        let per_layer = 2 * d            // ln1
            + 4 * d * d + 4 * d          // wq/wk/wv/wo + biases
            + 2 * d                      // ln2
            + d * self.d_ff + self.d_ff  // ff in
            + self.d_ff * d + d;         // ff out
        self.vocab_size * d + self.max_seq_len * d
            + self.n_layers * per_layer
            + 2 * d
            + d * self.n_classes + self.n_classes
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_divisibility() {
        let cfg = ModelConfig {
            vocab_size: 10,
            n_heads: 3,
            ..ModelConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn param_count_matches_a_hand_count() {
        let cfg = ModelConfig {
            n_layers: 1,
            n_heads: 2,
            d_model: 4,
            d_ff: 8,
            vocab_size: 5,
            max_seq_len: 6,
            n_classes: 3,
        };
        // emb 20 + pos 24 + ln1 8 + qkv/o 64+16 + ln2 8 + ff 32+8+32+4 + lnf 8 + head 12+3
        assert_eq!(cfg.param_count(), 20 + 24 + 8 + 80 + 8 + 76 + 8 + 15);
    }
}
