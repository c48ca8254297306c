//! Deterministic data-parallel training loop.
//!
//! Each example in a batch runs forward+backward on its own tape; gradients
//! are summed chunk-by-chunk in a fixed order, so results are bit-identical
//! regardless of how rayon schedules the chunks.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::transformer::{classify, TransformerModel};
use crate::datagen::LabeledExample;
use crate::error::{Error, Result};
use crate::numerics::{AdamConfig, AdamState, GradTape, Scalar, Tensor};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrainConfig {
    pub steps: u64,
    pub batch_size: usize,
    pub eval_interval: u64,
    pub optimizer: AdamConfig,
    pub seed: u64,
    /// Examples per parallel gradient chunk; fixed so the reduction order
    /// (and therefore every bit of the result) is schedule-independent.
    pub par_chunk: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 4000,
            batch_size: 32,
            eval_interval: 500,
            optimizer: AdamConfig::default(),
            seed: 0,
            par_chunk: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TraceEntry {
    pub step: u64,
    pub train_loss: f64,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub trace: Vec<TraceEntry>,
    pub best_val_accuracy: f64,
    pub best_step: u64,
    pub final_step: u64,
}

/// Train in place. On return the model holds the parameters of the best
/// validation evaluation (final parameters when `steps == 0` or the run never
/// evaluated).
pub fn train<E: Scalar>(
    model: &mut TransformerModel<E>,
    train_set: &[LabeledExample],
    val_set: &[LabeledExample],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    if train_set.is_empty() {
        return Err(Error::EmptyDataset("train"));
    }
    if cfg.batch_size == 0 || cfg.par_chunk == 0 {
        return Err(Error::Config("batch_size and par_chunk must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = AdamState::new(cfg.optimizer, &model.param_shapes());
    let mut trace = Vec::new();
    let mut best: Option<(f64, u64, Vec<Tensor<E>>)> = None;

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    order.shuffle(&mut rng);
    let mut cursor = 0usize;

    for step in 1..=cfg.steps {
        let mut batch = Vec::with_capacity(cfg.batch_size);
        for _ in 0..cfg.batch_size {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            batch.push(&train_set[order[cursor]]);
            cursor += 1;
        }

        let (loss, grads) = batch_gradients(model, &batch, cfg.par_chunk)?;
        if !loss.is_finite() {
            return Err(Error::Diverged { step });
        }
        adam.step(model.params_mut(), &grads)?;

        let evaluate = !val_set.is_empty()
            && (step % cfg.eval_interval == 0 || step == cfg.steps);
        let val_accuracy = if evaluate {
            let acc = accuracy(model, val_set)?;
            if best.as_ref().is_none_or(|(b, _, _)| acc > *b) {
                best = Some((acc, step, model.params().to_vec()));
            }
            Some(acc)
        } else {
            None
        };
        trace.push(TraceEntry {
            step,
            train_loss: loss,
            val_accuracy,
        });
    }

    let (best_val_accuracy, best_step) = match best {
        Some((acc, step, params)) => {
            model.params_mut().clone_from_slice(&params);
            (acc, step)
        }
        None => (f64::NAN, 0),
    };
    Ok(TrainOutcome {
        trace,
        best_val_accuracy,
        best_step,
        final_step: cfg.steps,
    })
}

/// Mean loss and summed gradients over one batch.
fn batch_gradients<E: Scalar>(
    model: &TransformerModel<E>,
    batch: &[&LabeledExample],
    par_chunk: usize,
) -> Result<(f64, Vec<Option<Tensor<E>>>)> {
    let chunks: Vec<(f64, Vec<Option<Vec<E>>>)> = batch
        .par_chunks(par_chunk)
        .map(|chunk| chunk_gradients(model, chunk))
        .collect::<Result<Vec<_>>>()?;

    let n_params = model.params().len();
    let inv_batch = E::from_f64(1.0 / batch.len() as f64);
    let mut total_loss = 0.0f64;
    let mut summed: Vec<Option<Vec<E>>> = vec![None; n_params];
    for (loss, grads) in chunks {
        total_loss += loss;
        for (dst, src) in summed.iter_mut().zip(grads) {
            match (dst.as_mut(), src) {
                (Some(d), Some(s)) => {
                    for (a, b) in d.iter_mut().zip(s) {
                        *a = *a + b;
                    }
                }
                (None, Some(s)) => *dst = Some(s),
                _ => {}
            }
        }
    }
    let grads = summed
        .into_iter()
        .enumerate()
        .map(|(i, g)| {
            g.map(|mut v| {
                for x in v.iter_mut() {
                    *x = *x * inv_batch;
                }
                Tensor::from_parts(model.params()[i].shape().to_vec(), v)
            })
        })
        .collect();
    Ok((total_loss / batch.len() as f64, grads))
}

/// Sequential forward+backward over one chunk, accumulating into flat buffers.
fn chunk_gradients<E: Scalar>(
    model: &TransformerModel<E>,
    chunk: &[&LabeledExample],
) -> Result<(f64, Vec<Option<Vec<E>>>)> {
    let mut loss_sum = 0.0f64;
    let mut acc: Vec<Option<Vec<E>>> = vec![None; model.params().len()];
    for ex in chunk {
        let mut tape = GradTape::new();
        let ids = model.register_params(&mut tape, true);
        let (logits, _) = model.forward_on_tape(
            &mut tape,
            &ids,
            &ex.prompt.token_ids,
            &BTreeSet::new(),
            &[],
        )?;
        let loss = tape.cross_entropy(logits, &[ex.label.class_index()])?;
        loss_sum += tape.value(loss).item().to_f64();
        let grads = tape.backward(loss)?;
        for (i, id) in ids.iter().enumerate() {
            if let Some(g) = grads.get(*id) {
                match acc[i].as_mut() {
                    Some(buf) => {
                        for (a, &b) in buf.iter_mut().zip(g.data()) {
                            *a = *a + b;
                        }
                    }
                    None => acc[i] = Some(g.data().to_vec()),
                }
            }
        }
    }
    Ok((loss_sum, acc))
}

/// Fraction of examples classified to their oracle label.
pub fn accuracy<E: Scalar>(
    model: &TransformerModel<E>,
    dataset: &[LabeledExample],
) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset("accuracy"));
    }
    let hits: Vec<bool> = dataset
        .par_iter()
        .map(|ex| -> Result<bool> {
            let logits = model.logits(&ex.prompt.token_ids)?;
            Ok(classify(&logits)? == ex.label)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(hits.iter().filter(|&&h| h).count() as f64 / dataset.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{GenConfig, Generator};
    use crate::model::ModelConfig;

    fn small_setup(n: usize) -> (TransformerModel<f32>, Vec<LabeledExample>) {
        let gen = Generator::new(GenConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let data = gen.generate_split(n, &mut rng).unwrap();
        let cfg = ModelConfig {
            n_layers: 2,
            n_heads: 2,
            d_model: 32,
            d_ff: 64,
            vocab_size: gen.tokenizer().vocab_size(),
            max_seq_len: 128,
            n_classes: 3,
        };
        (TransformerModel::init(cfg, 1).unwrap(), data)
    }

    #[test]
    fn zero_steps_changes_nothing() {
        let (mut model, data) = small_setup(8);
        let before: Vec<Tensor<f32>> = model.params().to_vec();
        let cfg = TrainConfig {
            steps: 0,
            ..TrainConfig::default()
        };
        train(&mut model, &data, &data, &cfg).unwrap();
        for (a, b) in model.params().iter().zip(before.iter()) {
            assert!(a.bit_eq(b));
        }
    }

    #[test]
    fn overfits_a_single_batch_of_eight() {
        let (mut model, data) = small_setup(8);
        let cfg = TrainConfig {
            steps: 200,
            batch_size: 8,
            eval_interval: 1_000_000,
            optimizer: AdamConfig {
                lr: 1e-3,
                ..AdamConfig::default()
            },
            seed: 3,
            par_chunk: 4,
        };
        let outcome = train(&mut model, &data, &[], &cfg).unwrap();
        let final_loss = outcome.trace.last().unwrap().train_loss;
        assert!(final_loss < 0.05, "memorization loss {final_loss}");
    }

    #[test]
    fn same_seed_identical_traces() {
        let run = || {
            let (mut model, data) = small_setup(16);
            let cfg = TrainConfig {
                steps: 12,
                batch_size: 4,
                eval_interval: 6,
                seed: 9,
                ..TrainConfig::default()
            };
            train(&mut model, &data, &data[..8], &cfg).unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.trace.len(), b.trace.len());
        for (x, y) in a.trace.iter().zip(b.trace.iter()) {
            assert_eq!(x.train_loss.to_bits(), y.train_loss.to_bits());
            assert_eq!(x.val_accuracy.map(f64::to_bits), y.val_accuracy.map(f64::to_bits));
        }
    }
}
