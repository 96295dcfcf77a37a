use super::{Scalar, Tensor};
use crate::error::Result;

pub fn relu<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    input.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Masks `grad_out` by `input > 0`; the derivative at exactly 0 is taken as 0.
pub fn relu_backward<T: Scalar>(grad_out: &Tensor<T>, input: &Tensor<T>) -> Result<Tensor<T>> {
    grad_out.expect_dims(input.dims(), "relu backward")?;
    let data = grad_out
        .data()
        .iter()
        .zip(input.data())
        .map(|(&g, &x)| if x > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::new(input.dims(), data)
}

/// Max-subtracted softmax over all elements.
pub fn softmax<T: Scalar>(logits: &Tensor<T>) -> Tensor<T> {
    let max = logits
        .data()
        .iter()
        .fold(T::neg_infinity(), |m, &v| if v > m { v } else { m });
    let exps: Vec<T> = logits.data().iter().map(|&v| (v - max).exp()).collect();
    let total = exps.iter().fold(T::zero(), |s, &v| s + v);
    Tensor::new(logits.dims(), exps.into_iter().map(|e| e / total).collect())
        .expect("softmax keeps dims")
}

/// Vector-Jacobian product of softmax: `p * (g - <g, p>)`.
pub fn softmax_backward<T: Scalar>(grad_out: &Tensor<T>, probs: &Tensor<T>) -> Result<Tensor<T>> {
    grad_out.expect_dims(probs.dims(), "softmax backward")?;
    let inner = grad_out
        .data()
        .iter()
        .zip(probs.data())
        .fold(T::zero(), |s, (&g, &p)| s + g * p);
    let data = grad_out
        .data()
        .iter()
        .zip(probs.data())
        .map(|(&g, &p)| p * (g - inner))
        .collect();
    Tensor::new(probs.dims(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_clamps_negatives() {
        let x = Tensor::from_slice(&[-2.0f32, -0.5, -1e-9]);
        assert!(relu(&x).data().iter().all(|&v| v == 0.0));
        let y = Tensor::from_slice(&[0.5f32, 3.0]);
        assert_eq!(relu(&y), y);
    }

    #[test]
    fn relu_gradient_at_zero_is_zero() {
        let x = Tensor::from_slice(&[0.0f64, 1.0, -1.0]);
        let g = relu_backward(&Tensor::full(&[3], 2.0), &x).unwrap();
        assert_eq!(g.data(), &[0.0, 2.0, 0.0]);
    }

    #[test]
    fn softmax_equal_logits_is_uniform() {
        let p = softmax(&Tensor::full(&[10], 3.0f64));
        assert!(p.data().iter().all(|&v| (v - 0.1).abs() < 1e-15));
    }

    #[test]
    fn softmax_handles_large_logits() {
        let p = softmax(&Tensor::from_slice(&[1000.0f32, 1000.0, -1000.0]));
        assert!(p.all_finite());
        assert!((p.data()[0] - 0.5).abs() < 1e-6);
    }
}
