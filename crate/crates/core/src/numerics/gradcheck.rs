//! Central finite-difference verification of tape gradients (f64 only).

use super::tape::{GradTape, TensorId};
use super::tensor::Tensor;
use crate::error::Result;

/// Compare tape gradients against central finite differences.
///
/// `build` must express the scalar function on the supplied tape, with the
/// leaves already registered in the order of `point`. Returns the maximum
/// relative error over every element of every input tensor.
pub fn grad_check<F>(build: F, point: &[Tensor<f64>], epsilon: f64) -> Result<f64>
where
    F: Fn(&mut GradTape<f64>, &[TensorId]) -> Result<TensorId>,
{
    let eval = |tensors: &[Tensor<f64>]| -> Result<f64> {
        let mut tape = GradTape::new();
        let ids: Vec<TensorId> = tensors
            .iter()
            .map(|t| tape.leaf(t.clone().with_requires_grad(true)))
            .collect();
        let out = build(&mut tape, &ids)?;
        Ok(tape.value(out).item())
    };

    // Analytic gradients from one taped pass.
    let mut tape = GradTape::new();
    let ids: Vec<TensorId> = point
        .iter()
        .map(|t| tape.leaf(t.clone().with_requires_grad(true)))
        .collect();
    let out = build(&mut tape, &ids)?;
    let grads = tape.backward(out)?;

    let mut max_rel = 0.0f64;
    for (pi, tensor) in point.iter().enumerate() {
        let analytic = grads.get(ids[pi]);
        for elem in 0..tensor.numel() {
            let mut plus = point.to_vec();
            let mut minus = point.to_vec();
            plus[pi].data_mut()[elem] += epsilon;
            minus[pi].data_mut()[elem] -= epsilon;
            let numeric = (eval(&plus)? - eval(&minus)?) / (2.0 * epsilon);
            let a = analytic.map_or(0.0, |g| g.data()[elem]);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            if rel > max_rel {
                max_rel = rel;
            }
        }
    }
    Ok(max_rel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>) -> Tensor<f64> {
        let n = shape.iter().product();
        let data = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        Tensor::new(shape, data).unwrap()
    }

    #[test]
    fn quadratic_gradient_is_tight() {
        // f(x) = sum(x^2) expressed as x . x^T via matmul.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = random_tensor(&mut rng, vec![1, 6]);
        let xt = Tensor::new(vec![6, 1], x.data().to_vec()).unwrap();
        let err = grad_check(
            |tape, ids| {
                let prod = tape.matmul(ids[0], ids[1])?;
                Ok(prod)
            },
            &[x, xt],
            1e-6,
        )
        .unwrap();
        assert!(err < 1e-7, "relative error {}", err);
    }

    #[test]
    fn linear_function_is_exact_to_machine_precision() {
        let w = Tensor::new(vec![4, 1], vec![0.3, -1.1, 0.7, 2.0]).unwrap();
        let x = Tensor::new(vec![1, 4], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let err = grad_check(
            |tape, ids| tape.matmul(ids[0], ids[1]),
            &[x, w],
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-9, "relative error {}", err);
    }

    /// Every differentiable op, composed, FD-checked across many seeds.
    #[test]
    fn composed_ops_gradcheck_over_100_seeds() {
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = random_tensor(&mut rng, vec![3, 4]);
            let w = random_tensor(&mut rng, vec![4, 4]);
            let b = random_tensor(&mut rng, vec![4]);
            let g = random_tensor(&mut rng, vec![4]);
            let q = random_tensor(&mut rng, vec![3, 4]);
            let err = grad_check(
                |tape, ids| {
                    let h = tape.matmul(ids[0], ids[1])?;
                    let h = tape.add_row(h, ids[2])?;
                    let h = tape.gelu(h)?;
                    let h = tape.layer_norm(h, ids[3], ids[2], 1e-5)?;
                    let h = tape.causal_attention(h, ids[4], h, 2)?;
                    let h = tape.softmax_last(h)?;
                    let h = tape.scale(h, 1.7)?;
                    let last = tape.select_row(h, 2)?;
                    tape.cross_entropy(last, &[1])
                },
                &[x, w, b, g, q],
                1e-6,
            )
            .unwrap();
            assert!(err < 1e-4, "seed {} relative error {}", seed, err);
        }
    }

    #[test]
    fn embedding_gradcheck() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let table = random_tensor(&mut rng, vec![5, 4]);
        let pos = random_tensor(&mut rng, vec![6, 4]);
        let err = grad_check(
            |tape, ids| {
                let e = tape.embed(ids[0], ids[1], &[3, 1, 4, 1])?;
                let last = tape.select_row(e, 3)?;
                tape.cross_entropy(last, &[2])
            },
            &[table, pos],
            1e-6,
        )
        .unwrap();
        assert!(err < 1e-7, "relative error {}", err);
    }
}
