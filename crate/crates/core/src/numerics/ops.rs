//! Pure forward kernels shared by the tape and by direct (no-grad) callers.

use ndarray::{ArrayView2, ArrayViewMut2};

use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Standard matrix product `a[m×k] · b[k×n]`.
///
/// The inner kernel is `ndarray::linalg::general_mat_mul`, which dispatches
/// to the blocked `matrixmultiply` sgemm/dgemm routines.
pub fn matmul<E: Scalar>(a: &Tensor<E>, b: &Tensor<E>) -> Result<Tensor<E>> {
    if !a.is_matrix() || !b.is_matrix() || a.cols() != b.rows() {
        return Err(Error::ShapeMismatch {
            op: "matmul",
            detail: format!("{:?} x {:?}", a.shape(), b.shape()),
        });
    }
    let (m, k, n) = (a.rows(), a.cols(), b.cols());
    let mut out = vec![E::ZERO; m * n];
    gemm(E::ONE, a.data(), m, k, b.data(), n, E::ZERO, &mut out);
    let t = Tensor::from_parts(vec![m, n], out);
    t.check_finite("matmul")?;
    Ok(t)
}

/// `c += alpha * a·b` over raw row-major slices.
pub(crate) fn gemm<E: Scalar>(
    alpha: E,
    a: &[E],
    m: usize,
    k: usize,
    b: &[E],
    n: usize,
    beta: E,
    c: &mut [E],
) {
    let av = ArrayView2::from_shape((m, k), a).expect("gemm lhs shape");
    let bv = ArrayView2::from_shape((k, n), b).expect("gemm rhs shape");
    let mut cv = ArrayViewMut2::from_shape((m, n), c).expect("gemm out shape");
    ndarray::linalg::general_mat_mul(alpha, &av, &bv, beta, &mut cv);
}

/// `ga += gout · b^T` where `gout` is `m×n` and `b` is `k×n`.
pub(crate) fn gemm_a_bt<E: Scalar>(gout: &[E], m: usize, n: usize, b: &[E], k: usize, ga: &mut [E]) {
    let gv = ArrayView2::from_shape((m, n), gout).expect("gemm_a_bt gout shape");
    let bv = ArrayView2::from_shape((k, n), b).expect("gemm_a_bt rhs shape");
    let mut cv = ArrayViewMut2::from_shape((m, k), ga).expect("gemm_a_bt out shape");
    ndarray::linalg::general_mat_mul(E::ONE, &gv, &bv.t(), E::ONE, &mut cv);
}

/// `gb += a^T · gout` where `a` is `m×k` and `gout` is `m×n`.
pub(crate) fn gemm_at_b<E: Scalar>(a: &[E], m: usize, k: usize, gout: &[E], n: usize, gb: &mut [E]) {
    let av = ArrayView2::from_shape((m, k), a).expect("gemm_at_b lhs shape");
    let gv = ArrayView2::from_shape((m, n), gout).expect("gemm_at_b gout shape");
    let mut cv = ArrayViewMut2::from_shape((k, n), gb).expect("gemm_at_b out shape");
    ndarray::linalg::general_mat_mul(E::ONE, &av.t(), &gv, E::ONE, &mut cv);
}

/// Row-wise softmax over the last axis, computed with max-subtraction.
pub fn softmax_last_axis<E: Scalar>(x: &Tensor<E>) -> Result<Tensor<E>> {
    let width = x.cols();
    if width == 0 {
        return Err(Error::ShapeMismatch {
            op: "softmax",
            detail: "zero-width last axis".into(),
        });
    }
    let mut out = x.data().to_vec();
    for row in out.chunks_mut(width) {
        softmax_row_in_place(row);
    }
    let t = Tensor::from_parts(x.shape().to_vec(), out);
    t.check_finite("softmax")?;
    Ok(t)
}

/// In-place stable softmax of one row.
pub(crate) fn softmax_row_in_place<E: Scalar>(row: &mut [E]) {
    let mut max = row[0];
    for &v in row.iter() {
        max = max.maximum(v);
    }
    let mut sum = E::ZERO;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum = sum + *v;
    }
    for v in row.iter_mut() {
        *v = *v / sum;
    }
}

/// Layer normalization with affine gain/bias over the last axis.
///
/// Returns the output along with per-row mean and inverse standard deviation
/// (needed by the backward pass).
pub fn layer_norm<E: Scalar>(
    x: &Tensor<E>,
    gain: &Tensor<E>,
    bias: &Tensor<E>,
    eps: E,
) -> Result<(Tensor<E>, Vec<E>, Vec<E>)> {
    let width = x.cols();
    if width == 0 {
        return Err(Error::ShapeMismatch {
            op: "layer_norm",
            detail: "zero-width rows".into(),
        });
    }
    if gain.numel() != width || bias.numel() != width {
        return Err(Error::ShapeMismatch {
            op: "layer_norm",
            detail: format!(
                "gain {:?} / bias {:?} vs width {}",
                gain.shape(),
                bias.shape(),
                width
            ),
        });
    }
    let rows = x.numel() / width;
    let inv_n = E::ONE / E::from_f64(width as f64);
    let mut out = vec![E::ZERO; x.numel()];
    let mut means = vec![E::ZERO; rows];
    let mut inv_stds = vec![E::ZERO; rows];
    let g = gain.data();
    let b = bias.data();
    for r in 0..rows {
        let src = &x.data()[r * width..(r + 1) * width];
        let dst = &mut out[r * width..(r + 1) * width];
        let mut mean = E::ZERO;
        for &v in src {
            mean = mean + v;
        }
        mean = mean * inv_n;
        let mut var = E::ZERO;
        for &v in src {
            let d = v - mean;
            var = var + d * d;
        }
        var = var * inv_n;
        let inv_std = E::ONE / (var + eps).sqrt();
        for i in 0..width {
            dst[i] = (src[i] - mean) * inv_std * g[i] + b[i];
        }
        means[r] = mean;
        inv_stds[r] = inv_std;
    }
    let t = Tensor::from_parts(x.shape().to_vec(), out);
    t.check_finite("layer_norm")?;
    Ok((t, means, inv_stds))
}

/// Mean negative log-softmax-probability of the true class.
///
/// Returns the scalar loss and the softmax probabilities (saved for backward).
pub fn cross_entropy<E: Scalar>(logits: &Tensor<E>, labels: &[usize]) -> Result<(E, Vec<E>)> {
    if !logits.is_matrix() || logits.rows() != labels.len() {
        return Err(Error::ShapeMismatch {
            op: "cross_entropy",
            detail: format!("logits {:?} vs {} labels", logits.shape(), labels.len()),
        });
    }
    let classes = logits.cols();
    for &l in labels {
        if l >= classes {
            return Err(Error::ShapeMismatch {
                op: "cross_entropy",
                detail: format!("label {} out of range for {} classes", l, classes),
            });
        }
    }
    let mut probs = logits.data().to_vec();
    let mut loss = E::ZERO;
    for (row, &label) in probs.chunks_mut(classes).zip(labels.iter()) {
        softmax_row_in_place(row);
        loss = loss - row[label].ln();
    }
    loss = loss / E::from_f64(labels.len() as f64);
    if !loss.is_finite() {
        return Err(Error::NonFinite { op: "cross_entropy" });
    }
    Ok((loss, probs))
}

/// GELU activation (tanh approximation, GPT-2 convention).
pub fn gelu<E: Scalar>(x: E) -> E {
    let c = E::from_f64(0.797_884_560_802_865_4); // sqrt(2/pi)
    let k = E::from_f64(0.044_715);
    let half = E::from_f64(0.5);
    let u = c * (x + k * x * x * x);
    half * x * (E::ONE + u.tanh())
}

/// Derivative of [`gelu`].
pub fn gelu_grad<E: Scalar>(x: E) -> E {
    let c = E::from_f64(0.797_884_560_802_865_4);
    let k = E::from_f64(0.044_715);
    let half = E::from_f64(0.5);
    let three = E::from_f64(3.0);
    let u = c * (x + k * x * x * x);
    let t = u.tanh();
    let sech2 = E::ONE - t * t;
    half * (E::ONE + t) + half * x * sech2 * c * (E::ONE + three * k * x * x)
}

/// Multi-head causal self-attention over packed `[seq × d_model]` inputs.
///
/// Scores and the weighted sum only ever touch positions `j <= i`, so a row's
/// output is exactly independent of later tokens.
///
/// Returns the output and the attention probabilities laid out as
/// `[head][query][key]` with zeros above the diagonal.
pub fn causal_attention<E: Scalar>(
    q: &Tensor<E>,
    k: &Tensor<E>,
    v: &Tensor<E>,
    n_heads: usize,
) -> Result<(Tensor<E>, Vec<E>)> {
    let seq = q.rows();
    let d_model = q.cols();
    if k.shape() != q.shape() || v.shape() != q.shape() {
        return Err(Error::ShapeMismatch {
            op: "causal_attention",
            detail: format!("q {:?} k {:?} v {:?}", q.shape(), k.shape(), v.shape()),
        });
    }
    if n_heads == 0 || d_model % n_heads != 0 {
        return Err(Error::ShapeMismatch {
            op: "causal_attention",
            detail: format!("d_model {} not divisible by {} heads", d_model, n_heads),
        });
    }
    let dh = d_model / n_heads;
    let scale = E::ONE / E::from_f64((dh as f64).sqrt());
    let qd = q.data();
    let kd = k.data();
    let vd = v.data();
    let mut out = vec![E::ZERO; seq * d_model];
    let mut probs = vec![E::ZERO; n_heads * seq * seq];

    for h in 0..n_heads {
        let off = h * dh;
        for i in 0..seq {
            let qi = &qd[i * d_model + off..i * d_model + off + dh];
            let p_row = &mut probs[h * seq * seq + i * seq..h * seq * seq + i * seq + i + 1];
            // scores for j <= i only
            let mut max = E::from_f64(f64::NEG_INFINITY);
            for (j, p) in p_row.iter_mut().enumerate() {
                let kj = &kd[j * d_model + off..j * d_model + off + dh];
                let mut s = E::ZERO;
                for t in 0..dh {
                    s = s + qi[t] * kj[t];
                }
                *p = s * scale;
                max = max.maximum(*p);
            }
            let mut sum = E::ZERO;
            for p in p_row.iter_mut() {
                *p = (*p - max).exp();
                sum = sum + *p;
            }
            for p in p_row.iter_mut() {
                *p = *p / sum;
            }
            let dst_base = i * d_model + off;
            for (j, &p) in p_row.iter().enumerate() {
                let vj = &vd[j * d_model + off..j * d_model + off + dh];
                let dst = &mut out[dst_base..dst_base + dh];
                for t in 0..dh {
                    dst[t] = dst[t] + p * vj[t];
                }
            }
        }
    }
    let t = Tensor::from_parts(vec![seq, d_model], out);
    t.check_finite("causal_attention")?;
    Ok((t, probs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tensor(shape: Vec<usize>, data: Vec<f64>) -> Tensor<f64> {
        Tensor::new(shape, data).unwrap()
    }

    /// Naive triple-loop reference for matmul.
    fn matmul_reference(a: &Tensor<f64>, b: &Tensor<f64>) -> Vec<f64> {
        let (m, k, n) = (a.rows(), a.cols(), b.cols());
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                let mut acc = 0.0;
                for t in 0..k {
                    acc += a.data()[i * k + t] * b.data()[t * n + j];
                }
                out[i * n + j] = acc;
            }
        }
        out
    }

    #[test]
    fn matmul_identity() {
        let eye = tensor(vec![3, 3], vec![1., 0., 0., 0., 1., 0., 0., 0., 1.]);
        let m = tensor(vec![3, 2], vec![1., 2., 3., 4., 5., 6.]);
        let r = matmul(&eye, &m).unwrap();
        assert_eq!(r.data(), m.data());
    }

    #[test]
    fn matmul_annihilates_zeros() {
        let z = Tensor::<f64>::zeros(vec![2, 3]);
        let m = tensor(vec![3, 4], (0..12).map(|v| v as f64).collect());
        let r = matmul(&z, &m).unwrap();
        assert_eq!(r.shape(), &[2, 4]);
        assert!(r.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matmul_matches_triple_loop_reference() {
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) as f64 / (1u64 << 31) as f64) - 1.0
        };
        let a = tensor(vec![4, 4], (0..16).map(|_| next()).collect());
        let b = tensor(vec![4, 4], (0..16).map(|_| next()).collect());
        let got = matmul(&a, &b).unwrap();
        let want = matmul_reference(&a, &b);
        for (g, w) in got.data().iter().zip(want.iter()) {
            let rel = (g - w).abs() / w.abs().max(1e-12);
            assert!(rel < 1e-6, "got {} want {}", g, w);
        }
    }

    #[test]
    fn matmul_rejects_mismatched_inner_dims() {
        let a = Tensor::<f64>::zeros(vec![2, 3]);
        let b = Tensor::<f64>::zeros(vec![4, 2]);
        assert!(matches!(matmul(&a, &b), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn softmax_uniform_on_equal_inputs() {
        let x = tensor(vec![1, 3], vec![0.0, 0.0, 0.0]);
        let y = softmax_last_axis(&x).unwrap();
        for &v in y.data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_survives_large_magnitudes() {
        let x = tensor(vec![1, 3], vec![1000.0, 0.0, -1000.0]);
        let y = softmax_last_axis(&x).unwrap();
        assert!((y.data()[0] - 1.0).abs() < 1e-9);
        assert!(y.data()[1].abs() < 1e-9);
        assert!(y.data()[2].abs() < 1e-9);
        assert!(y.all_finite());
    }

    #[test]
    fn softmax_matches_direct_formula() {
        let vals = vec![0.3, -1.2, 2.5, 0.0, 1.1];
        let x = tensor(vec![1, 5], vals.clone());
        let y = softmax_last_axis(&x).unwrap();
        let denom: f64 = vals.iter().map(|v| v.exp()).sum();
        for (got, v) in y.data().iter().zip(vals.iter()) {
            assert!((got - v.exp() / denom).abs() < 1e-9);
        }
    }

    #[test]
    fn layer_norm_zero_variance_row() {
        let x = tensor(vec![1, 4], vec![5.0; 4]);
        let g = tensor(vec![4], vec![1.0; 4]);
        let b = tensor(vec![4], vec![0.0; 4]);
        let (y, _, _) = layer_norm(&x, &g, &b, 1e-5).unwrap();
        for &v in y.data() {
            assert!(v.abs() < 1e-6);
        }
    }

    #[test]
    fn layer_norm_preserves_already_normalized_row() {
        let x = tensor(vec![1, 2], vec![1.0, -1.0]);
        let g = tensor(vec![2], vec![1.0; 2]);
        let b = tensor(vec![2], vec![0.0; 2]);
        let (y, _, _) = layer_norm(&x, &g, &b, 1e-12).unwrap();
        assert!((y.data()[0] - 1.0).abs() < 1e-5);
        assert!((y.data()[1] + 1.0).abs() < 1e-5);
    }

    #[test]
    fn layer_norm_moments() {
        let vals = vec![0.7, -2.2, 1.5, 0.1, 3.3, -0.4, 0.9, -1.8];
        let x = tensor(vec![1, 8], vals);
        let g = tensor(vec![8], vec![1.0; 8]);
        let b = tensor(vec![8], vec![0.0; 8]);
        let (y, _, _) = layer_norm(&x, &g, &b, 1e-12).unwrap();
        let mean: f64 = y.data().iter().sum::<f64>() / 8.0;
        let var: f64 = y.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 8.0;
        assert!(mean.abs() < 1e-6);
        assert!((var - 1.0).abs() < 1e-4);
    }

    #[test]
    fn layer_norm_rejects_zero_width() {
        let x = Tensor::<f64>::zeros(vec![2, 0]);
        let g = Tensor::<f64>::zeros(vec![0]);
        let b = Tensor::<f64>::zeros(vec![0]);
        assert!(layer_norm(&x, &g, &b, 1e-5).is_err());
    }

    #[test]
    fn cross_entropy_uniform_is_ln3() {
        let logits = tensor(vec![1, 3], vec![0.0; 3]);
        let (loss, _) = cross_entropy(&logits, &[1]).unwrap();
        assert!((loss - 3.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_decreases_with_margin() {
        let mut last = f64::INFINITY;
        for margin in [0.0, 0.5, 1.0, 2.0, 4.0] {
            let logits = tensor(vec![1, 3], vec![margin, 0.0, 0.0]);
            let (loss, _) = cross_entropy(&logits, &[0]).unwrap();
            assert!(loss < last);
            last = loss;
        }
    }

    #[test]
    fn cross_entropy_matches_direct_formula() {
        let rows = vec![[0.2, -1.3, 0.9], [2.0, 0.1, -0.5]];
        let labels = [2usize, 0usize];
        let logits = tensor(vec![2, 3], rows.iter().flatten().copied().collect());
        let (loss, _) = cross_entropy(&logits, &labels).unwrap();
        let mut want = 0.0;
        for (row, &l) in rows.iter().zip(labels.iter()) {
            let denom: f64 = row.iter().map(|v| v.exp()).sum();
            want -= (row[l].exp() / denom).ln();
        }
        want /= 2.0;
        assert!((loss - want).abs() < 1e-9);
    }

    #[test]
    fn cross_entropy_rejects_out_of_range_label() {
        let logits = tensor(vec![1, 3], vec![0.0; 3]);
        assert!(cross_entropy(&logits, &[3]).is_err());
    }

    #[test]
    fn attention_rows_ignore_future_tokens() {
        let seq = 5;
        let d = 8;
        let base: Vec<f64> = (0..seq * d).map(|i| ((i * 37 % 19) as f64 - 9.0) / 7.0).collect();
        let q = tensor(vec![seq, d], base.clone());
        let k = tensor(vec![seq, d], base.iter().map(|v| v * 0.5 + 0.1).collect());
        let mut v2 = base.clone();
        let v = tensor(vec![seq, d], base.iter().map(|v| v - 0.3).collect());
        let (out, _) = causal_attention(&q, &k, &v, 2).unwrap();

        // Perturb the last position of every input.
        for t in 0..d {
            v2[(seq - 1) * d + t] += 100.0;
        }
        let q2 = tensor(vec![seq, d], v2.clone());
        let (out2, _) = causal_attention(&q2, &k, &v, 2).unwrap();
        for i in 0..seq - 1 {
            assert_eq!(out.row(i), out2.row(i));
        }
    }

    #[test]
    fn attention_first_row_is_its_own_value() {
        let seq = 3;
        let d = 4;
        let data: Vec<f64> = (0..seq * d).map(|i| i as f64 * 0.1).collect();
        let q = tensor(vec![seq, d], data.clone());
        let k = tensor(vec![seq, d], data.clone());
        let v = tensor(vec![seq, d], data.clone());
        let (out, _) = causal_attention(&q, &k, &v, 2).unwrap();
        assert_eq!(out.row(0), v.row(0));
    }
}
