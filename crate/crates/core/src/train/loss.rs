use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Probabilities are clipped to this before the log.
pub const PROB_FLOOR: f64 = 1e-12;

fn check_target<T: Scalar>(probs: &Tensor<T>, target: usize) -> Result<()> {
    if probs.rank() != 1 {
        return Err(Error::shape(format!("cross-entropy expects a vector, got {:?}", probs.dims())));
    }
    if target >= probs.len() {
        return Err(Error::shape(format!(
            "target class {target} out of range for {} classes",
            probs.len()
        )));
    }
    Ok(())
}

/// `-ln max(p[target], 1e-12)`.
pub fn cross_entropy<T: Scalar>(probs: &Tensor<T>, target: usize) -> Result<f64> {
    check_target(probs, target)?;
    Ok(-probs.data()[target].to_f64().max(PROB_FLOOR).ln())
}

/// Gradient of softmax followed by cross-entropy, taken w.r.t. the logits:
/// `p - onehot(target)`.
pub fn cross_entropy_grad<T: Scalar>(probs: &Tensor<T>, target: usize) -> Result<Tensor<T>> {
    check_target(probs, target)?;
    let mut g = probs.clone();
    let d = g.data_mut();
    d[target] = T::from_f64(d[target].to_f64() - 1.0);
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::gradcheck::{finite_difference_check, DEFAULT_STEP};
    use crate::tensor::{softmax, softmax_backward, RngState};

    #[test]
    fn certain_and_uniform() {
        let p = Tensor::<f64>::from_slice(&[0.0, 1.0, 0.0]);
        assert_eq!(cross_entropy(&p, 1).unwrap(), 0.0);
        let u = Tensor::<f64>::full(&[10], 0.1);
        assert!((cross_entropy(&u, 3).unwrap() - 10f64.ln()).abs() < 1e-12);
        // Clipped rather than infinite.
        assert!((cross_entropy(&p, 0).unwrap() + PROB_FLOOR.ln()).abs() < 1e-9);
        assert!(cross_entropy(&p, 3).is_err());
    }

    #[test]
    fn fused_gradient_matches_composed_ops() {
        let mut rng = RngState::new(21);
        for _ in 0..20 {
            let logits = Tensor::<f64>::from_fn(&[10], |_| rng.normal(0.0, 2.0));
            let target = rng.below(10);
            let p = softmax(&logits);
            let fused = cross_entropy_grad(&p, target).unwrap();
            let mut dl_dp = Tensor::<f64>::zeros(&[10]);
            dl_dp.data_mut()[target] = -1.0 / p.data()[target];
            let composed = softmax_backward(&dl_dp, &p).unwrap();
            assert!(fused.max_abs_diff(&composed) < 1e-10);

            let report = finite_difference_check(
                |x| cross_entropy(&softmax(&x[0]), target).unwrap(),
                std::slice::from_ref(&logits),
                &[fused],
                DEFAULT_STEP,
                1e-4,
            );
            assert!(report.passed, "{report:?}");
        }
    }
}
