//! Run manifests: everything a suite result depends on.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Identifies one suite run. Suite results are a pure function of the
/// manifest: re-running from an identical manifest reproduces byte-identical
/// result files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub suite: String,
    /// Selector / target / rule kind, suite-specific.
    pub target: String,
    /// Content hash of the checkpoint file.
    pub checkpoint_id: String,
    /// Content hash of the dataset file.
    pub dataset_id: String,
    pub seed: u64,
    pub samples: usize,
    /// Layer restriction; `None` sweeps every layer.
    pub layers: Option<Vec<usize>>,
    pub timestamp: String,
    /// Hash of every field above except the timestamp.
    pub config_hash: String,
}

impl RunManifest {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        suite: impl Into<String>,
        target: impl Into<String>,
        checkpoint_id: impl Into<String>,
        dataset_id: impl Into<String>,
        seed: u64,
        samples: usize,
        layers: Option<Vec<usize>>,
        timestamp: impl Into<String>,
    ) -> Self {
        let mut m = Self {
            suite: suite.into(),
            target: target.into(),
            checkpoint_id: checkpoint_id.into(),
            dataset_id: dataset_id.into(),
            seed,
            samples,
            layers,
            timestamp: timestamp.into(),
            config_hash: String::new(),
        };
        m.config_hash = m.compute_hash();
        m
    }

    fn compute_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.suite.as_bytes());
        h.update([0]);
        h.update(self.target.as_bytes());
        h.update([0]);
        h.update(self.checkpoint_id.as_bytes());
        h.update([0]);
        h.update(self.dataset_id.as_bytes());
        h.update([0]);
        h.update(self.seed.to_le_bytes());
        h.update(self.samples.to_le_bytes());
        if let Some(layers) = &self.layers {
            for l in layers {
                h.update(l.to_le_bytes());
            }
        }
        let digest = h.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_ignores_timestamp_but_not_config() {
        let a = RunManifest::new("iia", "consequent", "c1", "d1", 7, 100, None, "t1");
        let b = RunManifest::new("iia", "consequent", "c1", "d1", 7, 100, None, "t2");
        assert_eq!(a.config_hash, b.config_hash);
        let c = RunManifest::new("iia", "consequent", "c1", "d1", 8, 100, None, "t1");
        assert_ne!(a.config_hash, c.config_hash);
    }
}
