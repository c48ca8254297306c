//! Hook points, activation caches, and activation edits.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Scalar, Tensor};

/// Where reads and writes attach: the embedding output, or the output of a
/// residual block (attention + MLP + residual sums) before it feeds the next
/// block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum HookPoint {
    EmbeddingOutput,
    BlockOutput(usize),
}

impl fmt::Display for HookPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HookPoint::EmbeddingOutput => write!(f, "embedding"),
            HookPoint::BlockOutput(l) => write!(f, "block[{l}]"),
        }
    }
}

impl HookPoint {
    pub fn validate(&self, n_layers: usize) -> Result<()> {
        match self {
            HookPoint::EmbeddingOutput => Ok(()),
            HookPoint::BlockOutput(l) if *l < n_layers => Ok(()),
            HookPoint::BlockOutput(l) => Err(Error::PositionOutOfRange {
                position: *l,
                len: n_layers,
            }),
        }
    }

    /// The embedding hook plus every block output, in forward order.
    pub fn sweep(n_layers: usize) -> Vec<HookPoint> {
        std::iter::once(HookPoint::EmbeddingOutput)
            .chain((0..n_layers).map(HookPoint::BlockOutput))
            .collect()
    }
}

/// Per-hook `[seq_len x d_model]` activations captured during one forward
/// pass. Values reflect any edit applied at that hook.
#[derive(Debug, Clone)]
pub struct ActivationCache<E> {
    seq_len: usize,
    map: BTreeMap<HookPoint, Tensor<E>>,
}

impl<E: Scalar> ActivationCache<E> {
    pub(crate) fn new(seq_len: usize) -> Self {
        Self {
            seq_len,
            map: BTreeMap::new(),
        }
    }

    pub(crate) fn insert(&mut self, hook: HookPoint, t: Tensor<E>) {
        debug_assert_eq!(t.rows(), self.seq_len);
        self.map.insert(hook, t);
    }

    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    pub fn hooks(&self) -> impl Iterator<Item = HookPoint> + '_ {
        self.map.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn get(&self, hook: HookPoint) -> Result<&Tensor<E>> {
        self.map
            .get(&hook)
            .ok_or_else(|| Error::MissingCache(hook.to_string()))
    }

    /// Rows at `positions`, stacked into a `[positions.len() x d_model]`
    /// tensor — the replacement payload for an interchange edit.
    pub fn rows_at(&self, hook: HookPoint, positions: &[usize]) -> Result<Tensor<E>> {
        let t = self.get(hook)?;
        let d = t.cols();
        let mut data = Vec::with_capacity(positions.len() * d);
        for &p in positions {
            if p >= t.rows() {
                return Err(Error::PositionOutOfRange {
                    position: p,
                    len: t.rows(),
                });
            }
            data.extend_from_slice(t.row(p));
        }
        Ok(Tensor::from_parts(vec![positions.len(), d], data))
    }
}

/// What to write at a hook, applied to the hook output before it feeds the
/// next layer.
#[derive(Debug, Clone)]
pub enum EditAction<E> {
    /// Zero the rows at these positions; leave the rest untouched.
    SetZero(Vec<usize>),
    /// Keep only these rows; zero everything else.
    KeepOnlyZeroRest(Vec<usize>),
    /// Replace the rows at `positions` with `rows` (one per position).
    Replace { positions: Vec<usize>, rows: Tensor<E> },
    /// Replace the whole `[seq x d_model]` activation.
    ReplaceAll(Tensor<E>),
}

/// An edit bound to its hook point.
#[derive(Debug, Clone)]
pub struct ActivationEdit<E> {
    pub hook: HookPoint,
    pub action: EditAction<E>,
}

impl<E: Scalar> ActivationEdit<E> {
    pub fn set_zero(hook: HookPoint, positions: Vec<usize>) -> Self {
        Self {
            hook,
            action: EditAction::SetZero(positions),
        }
    }

    pub fn keep_only(hook: HookPoint, positions: Vec<usize>) -> Self {
        Self {
            hook,
            action: EditAction::KeepOnlyZeroRest(positions),
        }
    }

    pub fn replace(hook: HookPoint, positions: Vec<usize>, rows: Tensor<E>) -> Self {
        Self {
            hook,
            action: EditAction::Replace { positions, rows },
        }
    }

    pub fn replace_all(hook: HookPoint, tensor: Tensor<E>) -> Self {
        Self {
            hook,
            action: EditAction::ReplaceAll(tensor),
        }
    }

    pub fn validate(&self, n_layers: usize, seq_len: usize, d_model: usize) -> Result<()> {
        self.hook.validate(n_layers)?;
        let check_positions = |positions: &[usize]| -> Result<()> {
            let mut prev: Option<usize> = None;
            for &p in positions {
                if p >= seq_len {
                    return Err(Error::PositionOutOfRange {
                        position: p,
                        len: seq_len,
                    });
                }
                if prev.is_some_and(|q| q >= p) {
                    return Err(Error::ShapeMismatch {
                        op: "edit",
                        detail: "positions must be strictly increasing".into(),
                    });
                }
                prev = Some(p);
            }
            Ok(())
        };
        match &self.action {
            EditAction::SetZero(p) | EditAction::KeepOnlyZeroRest(p) => check_positions(p),
            EditAction::Replace { positions, rows } => {
                check_positions(positions)?;
                if rows.rows() != positions.len() || rows.cols() != d_model {
                    return Err(Error::ShapeMismatch {
                        op: "edit",
                        detail: format!(
                            "replacement {:?} for {} positions of width {}",
                            rows.shape(),
                            positions.len(),
                            d_model
                        ),
                    });
                }
                Ok(())
            }
            EditAction::ReplaceAll(t) => {
                if t.rows() != seq_len || t.cols() != d_model {
                    return Err(Error::ShapeMismatch {
                        op: "edit",
                        detail: format!(
                            "full-layer replacement {:?} vs [{} x {}]",
                            t.shape(),
                            seq_len,
                            d_model
                        ),
                    });
                }
                Ok(())
            }
        }
    }
}
