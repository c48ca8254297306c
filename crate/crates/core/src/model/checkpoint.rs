//! Checkpoint container: text header, then raw little-endian f32 parameters.
//!
//! ```text
//! patchlab-checkpoint v1
//! n_layers=8
//! n_heads=4
//! d_model=128
//! d_ff=512
//! vocab_size=44
//! max_seq_len=128
//! n_classes=3
//! trained_steps=6000
//! param_count=1634563
//! checksum=<sha256 hex of the payload>
//! ---
//! <param_count little-endian f32 values, parameters in canonical order>
//! ```
//!
//! Canonical parameter order is [`TransformerModel::param_names`]: token
//! embedding, positional embedding, then per layer ln1 gain/bias, wq, bq,
//! wk, bk, wv, bv, wo, bo, ln2 gain/bias, ff.w1, ff.b1, ff.w2, ff.b2, then
//! final_ln gain/bias and head weight/bias.

use std::fs;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::config::ModelConfig;
use super::transformer::TransformerModel;
use crate::error::{Error, Result};
use crate::numerics::Tensor;

const MAGIC: &str = "patchlab-checkpoint";
const VERSION: &str = "v1";

/// A model plus its training progress.
#[derive(Debug)]
pub struct Checkpoint {
    pub model: TransformerModel<f32>,
    pub trained_steps: u64,
}

/// Serialize the model; `trained_steps` lets a later run resume the counter.
pub fn save_checkpoint(model: &TransformerModel<f32>, trained_steps: u64, path: &Path) -> Result<()> {
    let cfg = model.config();
    let mut payload = Vec::with_capacity(cfg.param_count() * 4);
    for p in model.params() {
        for &v in p.data() {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    }
    let checksum = hex(&Sha256::digest(&payload));

    let mut out = Vec::new();
    writeln!(out, "{MAGIC} {VERSION}")?;
    writeln!(out, "n_layers={}", cfg.n_layers)?;
    writeln!(out, "n_heads={}", cfg.n_heads)?;
    writeln!(out, "d_model={}", cfg.d_model)?;
    writeln!(out, "d_ff={}", cfg.d_ff)?;
    writeln!(out, "vocab_size={}", cfg.vocab_size)?;
    writeln!(out, "max_seq_len={}", cfg.max_seq_len)?;
    writeln!(out, "n_classes={}", cfg.n_classes)?;
    writeln!(out, "trained_steps={trained_steps}")?;
    writeln!(out, "param_count={}", cfg.param_count())?;
    writeln!(out, "checksum={checksum}")?;
    writeln!(out, "---")?;
    out.extend_from_slice(&payload);
    fs::write(path, out)?;
    Ok(())
}

/// Load and validate a checkpoint (magic, version, shape, checksum).
pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path)?;
    let sep = b"\n---\n";
    let split = find(&bytes, sep).ok_or_else(|| {
        Error::CorruptCheckpoint("missing `---` header separator".into())
    })?;
    let header = std::str::from_utf8(&bytes[..split])
        .map_err(|_| Error::CorruptCheckpoint("header is not UTF-8".into()))?;
    let payload = &bytes[split + sep.len()..];

    let mut lines = header.lines();
    let magic = lines.next().unwrap_or_default();
    let mut parts = magic.split_whitespace();
    if parts.next() != Some(MAGIC) {
        return Err(Error::CorruptCheckpoint(format!(
            "bad magic line `{magic}`"
        )));
    }
    let version = parts.next().unwrap_or("").to_string();
    if version != VERSION {
        return Err(Error::CheckpointVersion {
            found: version,
            expected: VERSION.into(),
        });
    }

    let mut get = std::collections::HashMap::new();
    for line in lines {
        if let Some((k, v)) = line.split_once('=') {
            get.insert(k.to_string(), v.to_string());
        }
    }
    let field = |k: &str| -> Result<u64> {
        get.get(k)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::CorruptCheckpoint(format!("missing or bad field `{k}`")))
    };

    let cfg = ModelConfig {
        n_layers: field("n_layers")? as usize,
        n_heads: field("n_heads")? as usize,
        d_model: field("d_model")? as usize,
        d_ff: field("d_ff")? as usize,
        vocab_size: field("vocab_size")? as usize,
        max_seq_len: field("max_seq_len")? as usize,
        n_classes: field("n_classes")? as usize,
    };
    cfg.validate().map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;
    let trained_steps = field("trained_steps")?;
    let param_count = field("param_count")? as usize;
    if param_count != cfg.param_count() {
        return Err(Error::CorruptCheckpoint(format!(
            "param_count {} does not match config ({})",
            param_count,
            cfg.param_count()
        )));
    }
    if payload.len() != param_count * 4 {
        return Err(Error::CorruptCheckpoint(format!(
            "payload holds {} bytes, expected {}",
            payload.len(),
            param_count * 4
        )));
    }
    let checksum = get
        .get("checksum")
        .ok_or_else(|| Error::CorruptCheckpoint("missing checksum".into()))?;
    let actual = hex(&Sha256::digest(payload));
    if *checksum != actual {
        return Err(Error::CorruptCheckpoint(format!(
            "checksum mismatch: header {checksum}, payload {actual}"
        )));
    }

    // Slice the payload back into tensors following the canonical shapes.
    let reference = TransformerModel::<f32>::init(cfg, 0)?;
    let mut params = Vec::with_capacity(reference.params().len());
    let mut offset = 0usize;
    for shape in reference.param_shapes() {
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n);
        for i in 0..n {
            let start = (offset + i) * 4;
            let v = f32::from_le_bytes(payload[start..start + 4].try_into().unwrap());
            data.push(v);
        }
        offset += n;
        params.push(
            Tensor::new(shape, data)
                .map_err(|e| Error::CorruptCheckpoint(format!("bad parameter data: {e}")))?,
        );
    }
    let model = TransformerModel::from_params(cfg, params)?;
    Ok(Checkpoint {
        model,
        trained_steps,
    })
}

fn find(haystack: &[u8], needle: &[u8]) -> Option<usize> {
    haystack
        .windows(needle.len())
        .position(|w| w == needle)
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Content hash of a file on disk, used as a manifest identifier.
pub fn file_id(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    Ok(hex(&Sha256::digest(&bytes))[..16].to_string())
}
