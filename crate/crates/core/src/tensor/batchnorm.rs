use super::{Scalar, Tensor};
use crate::error::{Error, Result};

pub const BN_EPS: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct BatchNormGrads<T> {
    pub input: Tensor<T>,
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
}

fn check<T: Scalar>(input: &Tensor<T>, per_channel: [&Tensor<T>; 4]) -> Result<usize> {
    input.expect_rank(3, "batchnorm input")?;
    let c = input.dims()[0];
    for t in per_channel {
        t.expect_dims(&[c], "batchnorm channel parameter")?;
    }
    if let Some(v) = per_channel[3].data().iter().find(|&&v| v < T::zero()) {
        return Err(Error::data(format!("batchnorm running variance is negative ({v:?})")));
    }
    Ok(c)
}

/// Per-channel affine scale and shift `1/sqrt(var + eps) * gamma`,
/// `beta - mean * scale`.
fn affine<T: Scalar>(gamma: &Tensor<T>, beta: &Tensor<T>, mean: &Tensor<T>, var: &Tensor<T>, eps: f64) -> Vec<(T, T)> {
    let eps = T::from_f64(eps);
    (0..gamma.len())
        .map(|c| {
            let scale = gamma.data()[c] / (var.data()[c] + eps).sqrt();
            (scale, beta.data()[c] - mean.data()[c] * scale)
        })
        .collect()
}

/// `(x - mean) / sqrt(var + eps) * gamma + beta` per channel, using running
/// statistics.
pub fn batchnorm_inference<T: Scalar>(
    input: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    running_mean: &Tensor<T>,
    running_var: &Tensor<T>,
    eps: f64,
) -> Result<Tensor<T>> {
    let c = check(input, [gamma, beta, running_mean, running_var])?;
    let hw = input.len() / c;
    let coeffs = affine(gamma, beta, running_mean, running_var, eps);
    let mut out = input.clone();
    for (plane, &(scale, shift)) in out.data_mut().chunks_exact_mut(hw).zip(&coeffs) {
        for v in plane {
            *v = *v * scale + shift;
        }
    }
    Ok(out)
}

/// Gradients of inference-mode batch normalization (running statistics are
/// constants).
pub fn batchnorm_inference_backward<T: Scalar>(
    grad_out: &Tensor<T>,
    input: &Tensor<T>,
    gamma: &Tensor<T>,
    running_mean: &Tensor<T>,
    running_var: &Tensor<T>,
    eps: f64,
) -> Result<BatchNormGrads<T>> {
    let c = check(input, [gamma, gamma, running_mean, running_var])?;
    grad_out.expect_dims(input.dims(), "batchnorm grad_out")?;
    let hw = input.len() / c;
    let epsv = T::from_f64(eps);
    let mut gi = grad_out.clone();
    let mut gg = Tensor::zeros(&[c]);
    let mut gb = Tensor::zeros(&[c]);
    for ch in 0..c {
        let inv_std = T::one() / (running_var.data()[ch] + epsv).sqrt();
        let scale = gamma.data()[ch] * inv_std;
        let mean = running_mean.data()[ch];
        let (mut sg, mut sb) = (T::zero(), T::zero());
        let xs = &input.data()[ch * hw..(ch + 1) * hw];
        for (g, &x) in gi.data_mut()[ch * hw..(ch + 1) * hw].iter_mut().zip(xs) {
            sg = sg + *g * (x - mean) * inv_std;
            sb = sb + *g;
            *g = *g * scale;
        }
        gg.data_mut()[ch] = sg;
        gb.data_mut()[ch] = sb;
    }
    Ok(BatchNormGrads {
        input: gi,
        gamma: gg,
        beta: gb,
    })
}
