//! Pre-LN decoder-only transformer classifier with hookable block outputs.
//!
//! The classification head reads the final token's residual vector (the
//! question mark position in well-formed prompts). Interventions write to
//! the block-output sum, which is the input of the next block.

use std::collections::BTreeSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use super::hooks::{ActivationCache, ActivationEdit, EditAction, HookPoint};
use crate::error::{Error, Result};
use crate::logic::Label;
use crate::numerics::{GradTape, Scalar, Tensor, TensorId};

const LN_EPS: f64 = 1e-5;
const INIT_STD: f64 = 0.02;

/// Offsets of one layer's parameters within the flat parameter list.
const PER_LAYER: usize = 16;
const L_LN1_G: usize = 0;
const L_LN1_B: usize = 1;
const L_WQ: usize = 2;
const L_BQ: usize = 3;
const L_WK: usize = 4;
const L_BK: usize = 5;
const L_WV: usize = 6;
const L_BV: usize = 7;
const L_WO: usize = 8;
const L_BO: usize = 9;
const L_LN2_G: usize = 10;
const L_LN2_B: usize = 11;
const L_W1: usize = 12;
const L_B1: usize = 13;
const L_W2: usize = 14;
const L_B2: usize = 15;

#[derive(Debug, Clone)]
pub struct TransformerModel<E> {
    cfg: ModelConfig,
    params: Vec<Tensor<E>>,
}

impl<E: Scalar> TransformerModel<E> {
    /// Fresh model with GPT-2-style scaled-normal init (std 0.02), seeded.
    pub fn init(cfg: ModelConfig, seed: u64) -> Result<Self> {
        use rand::SeedableRng;
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        let mut params = Vec::with_capacity(Self::n_params(&cfg));
        let d = cfg.d_model;
        let mut normal = |shape: Vec<usize>| -> Tensor<E> {
            let n: usize = shape.iter().product();
            let data = (0..n)
                .map(|_| E::from_f64(INIT_STD * box_muller(&mut rng)))
                .collect();
            Tensor::from_parts(shape, data)
        };

        params.push(normal(vec![cfg.vocab_size, d]));
        params.push(normal(vec![cfg.max_seq_len, d]));
        for _ in 0..cfg.n_layers {
            params.push(ones(vec![d]));
            params.push(Tensor::zeros(vec![d]));
            for _ in 0..4 {
                params.push(normal(vec![d, d]));
                params.push(Tensor::zeros(vec![d]));
            }
            params.push(ones(vec![d]));
            params.push(Tensor::zeros(vec![d]));
            params.push(normal(vec![d, cfg.d_ff]));
            params.push(Tensor::zeros(vec![cfg.d_ff]));
            params.push(normal(vec![cfg.d_ff, d]));
            params.push(Tensor::zeros(vec![d]));
        }
        params.push(ones(vec![d]));
        params.push(Tensor::zeros(vec![d]));
        params.push(normal(vec![d, cfg.n_classes]));
        params.push(Tensor::zeros(vec![cfg.n_classes]));

        debug_assert_eq!(
            params.iter().map(Tensor::numel).sum::<usize>(),
            cfg.param_count()
        );
        Ok(Self { cfg, params })
    }

    /// Build from a flat parameter list in canonical order.
    pub fn from_params(cfg: ModelConfig, params: Vec<Tensor<E>>) -> Result<Self> {
        cfg.validate()?;
        if params.len() != Self::n_params(&cfg) {
            return Err(Error::ShapeMismatch {
                op: "from_params",
                detail: format!(
                    "expected {} tensors, got {}",
                    Self::n_params(&cfg),
                    params.len()
                ),
            });
        }
        let total: usize = params.iter().map(Tensor::numel).sum();
        if total != cfg.param_count() {
            return Err(Error::ShapeMismatch {
                op: "from_params",
                detail: format!("expected {} scalars, got {}", cfg.param_count(), total),
            });
        }
        Ok(Self { cfg, params })
    }

    fn n_params(cfg: &ModelConfig) -> usize {
        2 + cfg.n_layers * PER_LAYER + 4
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn params(&self) -> &[Tensor<E>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor<E>] {
        &mut self.params
    }

    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        self.params.iter().map(|t| t.shape().to_vec()).collect()
    }

    /// Canonical names aligned with the flat parameter order — also the
    /// checkpoint payload order.
    pub fn param_names(cfg: &ModelConfig) -> Vec<String> {
        let mut names = vec!["tok_emb".to_string(), "pos_emb".to_string()];
        for l in 0..cfg.n_layers {
            for field in [
                "ln1.gain", "ln1.bias", "attn.wq", "attn.bq", "attn.wk", "attn.bk", "attn.wv",
                "attn.bv", "attn.wo", "attn.bo", "ln2.gain", "ln2.bias", "ff.w1", "ff.b1",
                "ff.w2", "ff.b2",
            ] {
                names.push(format!("layers.{l}.{field}"));
            }
        }
        names.push("final_ln.gain".into());
        names.push("final_ln.bias".into());
        names.push("head.w".into());
        names.push("head.b".into());
        names
    }

    /// Cast every parameter (used to lift an f32 model to f64 for checks).
    pub fn cast<F: Scalar>(&self) -> TransformerModel<F> {
        TransformerModel {
            cfg: self.cfg,
            params: self.params.iter().map(Tensor::cast).collect(),
        }
    }

    fn layer_param(&self, ids: &[TensorId], layer: usize, offset: usize) -> TensorId {
        ids[2 + layer * PER_LAYER + offset]
    }

    /// Register every parameter on a tape.
    pub fn register_params(&self, tape: &mut GradTape<E>, requires_grad: bool) -> Vec<TensorId> {
        self.params
            .iter()
            .map(|p| tape.leaf(p.clone().with_requires_grad(requires_grad)))
            .collect()
    }

    /// Forward pass over one prompt.
    ///
    /// `capture` names the hook points to cache; `edits` are applied to the
    /// hook output before it feeds the next layer (at most one per hook),
    /// and caches hold post-edit values.
    pub fn forward(
        &self,
        tokens: &[u32],
        capture: &BTreeSet<HookPoint>,
        edits: &[ActivationEdit<E>],
    ) -> Result<(Tensor<E>, ActivationCache<E>)> {
        let mut tape = GradTape::new();
        let ids = self.register_params(&mut tape, false);
        let (logits, cache) = self.forward_on_tape(&mut tape, &ids, tokens, capture, edits)?;
        Ok((tape.value(logits).clone(), cache))
    }

    /// Bare logits, no capture, no edits.
    pub fn logits(&self, tokens: &[u32]) -> Result<Tensor<E>> {
        Ok(self.forward(tokens, &BTreeSet::new(), &[])?.0)
    }

    /// Forward pass recorded on an existing tape (the training path).
    pub fn forward_on_tape(
        &self,
        tape: &mut GradTape<E>,
        param_ids: &[TensorId],
        tokens: &[u32],
        capture: &BTreeSet<HookPoint>,
        edits: &[ActivationEdit<E>],
    ) -> Result<(TensorId, ActivationCache<E>)> {
        let cfg = &self.cfg;
        let seq = tokens.len();
        if seq == 0 {
            return Err(Error::ShapeMismatch {
                op: "forward",
                detail: "empty token sequence".into(),
            });
        }
        if seq > cfg.max_seq_len {
            return Err(Error::SequenceTooLong {
                len: seq,
                max: cfg.max_seq_len,
            });
        }
        for hook in capture {
            hook.validate(cfg.n_layers)?;
        }
        let mut edit_at: std::collections::BTreeMap<HookPoint, &ActivationEdit<E>> =
            std::collections::BTreeMap::new();
        for e in edits {
            e.validate(cfg.n_layers, seq, cfg.d_model)?;
            if edit_at.insert(e.hook, e).is_some() {
                return Err(Error::ConflictingEdits {
                    hook: e.hook.to_string(),
                });
            }
        }

        let ids: Vec<usize> = tokens.iter().map(|&t| t as usize).collect();
        let eps = E::from_f64(LN_EPS);
        let mut cache = ActivationCache::new(seq);

        let mut x = tape.embed(param_ids[0], param_ids[1], &ids)?;
        x = self.apply_hook(tape, x, HookPoint::EmbeddingOutput, &edit_at, capture, &mut cache)?;

        for l in 0..cfg.n_layers {
            let h = tape.layer_norm(
                x,
                self.layer_param(param_ids, l, L_LN1_G),
                self.layer_param(param_ids, l, L_LN1_B),
                eps,
            )?;
            let q = tape.matmul(h, self.layer_param(param_ids, l, L_WQ))?;
            let q = tape.add_row(q, self.layer_param(param_ids, l, L_BQ))?;
            let k = tape.matmul(h, self.layer_param(param_ids, l, L_WK))?;
            let k = tape.add_row(k, self.layer_param(param_ids, l, L_BK))?;
            let v = tape.matmul(h, self.layer_param(param_ids, l, L_WV))?;
            let v = tape.add_row(v, self.layer_param(param_ids, l, L_BV))?;
            let attn = tape.causal_attention(q, k, v, cfg.n_heads)?;
            let proj = tape.matmul(attn, self.layer_param(param_ids, l, L_WO))?;
            let proj = tape.add_row(proj, self.layer_param(param_ids, l, L_BO))?;
            x = tape.add(x, proj)?;

            let h2 = tape.layer_norm(
                x,
                self.layer_param(param_ids, l, L_LN2_G),
                self.layer_param(param_ids, l, L_LN2_B),
                eps,
            )?;
            let f = tape.matmul(h2, self.layer_param(param_ids, l, L_W1))?;
            let f = tape.add_row(f, self.layer_param(param_ids, l, L_B1))?;
            let f = tape.gelu(f)?;
            let f = tape.matmul(f, self.layer_param(param_ids, l, L_W2))?;
            let f = tape.add_row(f, self.layer_param(param_ids, l, L_B2))?;
            x = tape.add(x, f)?;

            x = self.apply_hook(tape, x, HookPoint::BlockOutput(l), &edit_at, capture, &mut cache)?;
        }

        let n = param_ids.len();
        let last = tape.select_row(x, seq - 1)?;
        let normed = tape.layer_norm(last, param_ids[n - 4], param_ids[n - 3], eps)?;
        let logits = tape.matmul(normed, param_ids[n - 2])?;
        let logits = tape.add_row(logits, param_ids[n - 1])?;
        Ok((logits, cache))
    }

    fn apply_hook(
        &self,
        tape: &mut GradTape<E>,
        x: TensorId,
        hook: HookPoint,
        edit_at: &std::collections::BTreeMap<HookPoint, &ActivationEdit<E>>,
        capture: &BTreeSet<HookPoint>,
        cache: &mut ActivationCache<E>,
    ) -> Result<TensorId> {
        let mut x = x;
        if let Some(edit) = edit_at.get(&hook) {
            let seq = tape.value(x).rows();
            let d = tape.value(x).cols();
            x = match &edit.action {
                EditAction::SetZero(positions) => {
                    let zeros = Tensor::zeros(vec![positions.len(), d]);
                    tape.replace_rows(x, positions, &zeros)?
                }
                EditAction::KeepOnlyZeroRest(positions) => {
                    let keep: BTreeSet<usize> = positions.iter().copied().collect();
                    let rest: Vec<usize> = (0..seq).filter(|p| !keep.contains(p)).collect();
                    let zeros = Tensor::zeros(vec![rest.len(), d]);
                    tape.replace_rows(x, &rest, &zeros)?
                }
                EditAction::Replace { positions, rows } => tape.replace_rows(x, positions, rows)?,
                EditAction::ReplaceAll(t) => {
                    let all: Vec<usize> = (0..seq).collect();
                    tape.replace_rows(x, &all, t)?
                }
            };
        }
        if capture.contains(&hook) {
            cache.insert(hook, tape.value(x).clone());
        }
        Ok(x)
    }
}

fn ones<E: Scalar>(shape: Vec<usize>) -> Tensor<E> {
    let n = shape.iter().product();
    Tensor::from_parts(shape, vec![E::ONE; n])
}

fn box_muller(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Argmax over three logits, ties broken toward the lowest index.
pub fn classify<E: Scalar>(logits: &Tensor<E>) -> Result<Label> {
    if logits.numel() != 3 {
        return Err(Error::ShapeMismatch {
            op: "classify",
            detail: format!("expected 3 logits, got {:?}", logits.shape()),
        });
    }
    logits.check_finite("classify")?;
    let d = logits.data();
    let mut best = 0usize;
    for i in 1..3 {
        if d[i] > d[best] {
            best = i;
        }
    }
    Ok(Label::from_class_index(best).unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_config() -> ModelConfig {
        ModelConfig {
            n_layers: 2,
            n_heads: 2,
            d_model: 16,
            d_ff: 32,
            vocab_size: 12,
            max_seq_len: 16,
            n_classes: 3,
        }
    }

    fn toy_model() -> TransformerModel<f32> {
        TransformerModel::init(toy_config(), 42).unwrap()
    }

    #[test]
    fn forward_is_deterministic() {
        let m = toy_model();
        let tokens = [1u32, 4, 2, 9, 0];
        let a = m.logits(&tokens).unwrap();
        let b = m.logits(&tokens).unwrap();
        assert!(a.bit_eq(&b));
    }

    #[test]
    fn capture_does_not_change_logits() {
        let m = toy_model();
        let tokens = [3u32, 1, 4, 1, 5];
        let plain = m.logits(&tokens).unwrap();
        let all_hooks: BTreeSet<HookPoint> = HookPoint::sweep(2).into_iter().collect();
        let (captured, cache) = m.forward(&tokens, &all_hooks, &[]).unwrap();
        assert!(plain.bit_eq(&captured));
        assert_eq!(cache.len(), 3);
        assert_eq!(cache.get(HookPoint::BlockOutput(1)).unwrap().rows(), 5);
    }

    #[test]
    fn self_replacement_is_a_no_op() {
        let m = toy_model();
        let tokens = [2u32, 7, 3, 3, 8, 1];
        let hooks: BTreeSet<HookPoint> = [HookPoint::BlockOutput(1)].into();
        let (plain, cache) = m.forward(&tokens, &hooks, &[]).unwrap();
        let rows = cache.rows_at(HookPoint::BlockOutput(1), &[1, 3, 4]).unwrap();
        let edit = ActivationEdit::replace(HookPoint::BlockOutput(1), vec![1, 3, 4], rows);
        let (edited, _) = m.forward(&tokens, &BTreeSet::new(), &[edit]).unwrap();
        assert!(plain.bit_eq(&edited));
    }

    #[test]
    fn embedding_replacement_equals_direct_run() {
        let m = toy_model();
        let a = [1u32, 2, 3, 4, 5, 6];
        let b = [6u32, 5, 4, 3, 2, 1];
        let hooks: BTreeSet<HookPoint> = [HookPoint::EmbeddingOutput].into();
        let (direct, cache_b) = m.forward(&b, &hooks, &[]).unwrap();
        let full = cache_b.get(HookPoint::EmbeddingOutput).unwrap().clone();
        let edit = ActivationEdit::replace_all(HookPoint::EmbeddingOutput, full);
        let (patched, _) = m.forward(&a, &BTreeSet::new(), &[edit]).unwrap();
        assert!(direct.bit_eq(&patched));
    }

    #[test]
    fn causality_under_suffix_perturbation() {
        let m = toy_model();
        let base = [1u32, 2, 3, 4, 5, 6, 7];
        let mut changed = base;
        changed[5] = 9;
        changed[6] = 0;
        let hooks: BTreeSet<HookPoint> = HookPoint::sweep(2).into_iter().collect();
        let (_, cache_a) = m.forward(&base, &hooks, &[]).unwrap();
        let (_, cache_b) = m.forward(&changed, &hooks, &[]).unwrap();
        for hook in HookPoint::sweep(2) {
            let ta = cache_a.get(hook).unwrap();
            let tb = cache_b.get(hook).unwrap();
            for pos in 0..5 {
                assert_eq!(ta.row(pos), tb.row(pos), "hook {hook} pos {pos}");
            }
        }
    }

    #[test]
    fn edit_locality_below_the_edited_layer() {
        let m = toy_model();
        let tokens = [4u32, 2, 8, 6, 1];
        let hooks: BTreeSet<HookPoint> =
            [HookPoint::EmbeddingOutput, HookPoint::BlockOutput(0)].into();
        let (_, clean) = m.forward(&tokens, &hooks, &[]).unwrap();
        let edit = ActivationEdit::set_zero(HookPoint::BlockOutput(1), vec![0, 2]);
        let (_, edited) = m.forward(&tokens, &hooks, &[edit]).unwrap();
        for hook in [HookPoint::EmbeddingOutput, HookPoint::BlockOutput(0)] {
            assert!(clean.get(hook).unwrap().bit_eq(edited.get(hook).unwrap()));
        }
    }

    #[test]
    fn conflicting_edits_are_rejected() {
        let m = toy_model();
        let e1 = ActivationEdit::set_zero(HookPoint::BlockOutput(0), vec![0]);
        let e2 = ActivationEdit::set_zero(HookPoint::BlockOutput(0), vec![1]);
        let err = m.forward(&[1, 2, 3], &BTreeSet::new(), &[e1, e2]).unwrap_err();
        assert!(matches!(err, Error::ConflictingEdits { .. }));
    }

    #[test]
    fn sequence_length_is_enforced() {
        let m = toy_model();
        let long = vec![0u32; 17];
        assert!(matches!(
            m.logits(&long),
            Err(Error::SequenceTooLong { .. })
        ));
    }

    #[test]
    fn classify_rules() {
        let t = |v: Vec<f32>| Tensor::new(vec![1, 3], v).unwrap();
        assert_eq!(classify(&t(vec![2.0, 0.1, 0.1])).unwrap(), Label::True);
        assert_eq!(classify(&t(vec![1.0, 1.0, 0.0])).unwrap(), Label::True);
        assert_eq!(classify(&t(vec![0.0, 0.0, 5.0])).unwrap(), Label::Unknown);
        assert_eq!(classify(&t(vec![0.0, 3.0, 3.0])).unwrap(), Label::False);
        assert!(classify(&Tensor::from_parts(vec![1, 3], vec![f32::NAN, 0.0, 0.0])).is_err());
    }

    #[test]
    fn classify_is_argmax_invariant() {
        let base = [0.3f32, -0.2, 0.9];
        let t = |v: Vec<f32>| Tensor::new(vec![1, 3], v).unwrap();
        let l0 = classify(&t(base.to_vec())).unwrap();
        let shifted = classify(&t(base.iter().map(|v| v + 7.5).collect())).unwrap();
        let scaled = classify(&t(base.iter().map(|v| v * 3.0).collect())).unwrap();
        assert_eq!(l0, shifted);
        assert_eq!(l0, scaled);
    }

    #[test]
    fn init_is_seed_deterministic() {
        let a = toy_model();
        let b = TransformerModel::<f32>::init(toy_config(), 42).unwrap();
        let c = TransformerModel::<f32>::init(toy_config(), 43).unwrap();
        for (pa, pb) in a.params().iter().zip(b.params()) {
            assert!(pa.bit_eq(pb));
        }
        assert!(a.params().iter().zip(c.params()).any(|(x, y)| !x.bit_eq(y)));
    }

    #[test]
    fn full_model_gradcheck_at_f64() {
        // End-to-end finite differences over a miniature model.
        let cfg = ModelConfig {
            n_layers: 2,
            n_heads: 2,
            d_model: 8,
            d_ff: 16,
            vocab_size: 9,
            max_seq_len: 8,
            n_classes: 3,
        };
        let model = TransformerModel::<f64>::init(cfg, 5).unwrap();
        let tokens = [1u32, 7, 2, 5];
        let point: Vec<Tensor<f64>> = model.params().to_vec();
        let err = crate::numerics::grad_check(
            |tape, ids| {
                let (logits, _) =
                    model.forward_on_tape(tape, ids, &tokens, &BTreeSet::new(), &[])?;
                tape.cross_entropy(logits, &[2])
            },
            &point,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-4, "max relative error {err}");
    }
}
