use super::{Scalar, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct DenseGrads<T> {
    pub input: Tensor<T>,
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

fn check<T: Scalar>(input: &Tensor<T>, weights: &Tensor<T>) -> Result<(usize, usize)> {
    input.expect_rank(1, "dense input")?;
    weights.expect_rank(2, "dense weights")?;
    let (m, n) = (weights.dims()[0], weights.dims()[1]);
    if input.len() != n {
        return Err(Error::shape(format!(
            "dense: input length {} does not match weights {:?}",
            input.len(),
            weights.dims()
        )));
    }
    Ok((m, n))
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// `out = W x + b` for `W: [m, n]`.
pub fn dense_forward<T: Scalar>(input: &Tensor<T>, weights: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let (m, n) = check(input, weights)?;
    bias.expect_dims(&[m], "dense bias")?;
    let x = input.data();
    let out = weights
        .data()
        .chunks_exact(n)
        .zip(bias.data())
        .map(|(row, &b)| dot(row, x) + b)
        .collect();
    Tensor::new(&[m], out)
}

/// Returns `(W^T g, g x^T, g)`.
pub fn dense_backward<T: Scalar>(
    grad_out: &Tensor<T>,
    input: &Tensor<T>,
    weights: &Tensor<T>,
) -> Result<DenseGrads<T>> {
    let mut gw = Tensor::zeros(weights.dims());
    let mut gb = Tensor::zeros(&[weights.dims()[0]]);
    let gi = dense_backward_accumulate(grad_out, input, weights, &mut gw, &mut gb, true)?;
    Ok(DenseGrads {
        input: gi.expect("input gradient requested"),
        weights: gw,
        bias: gb,
    })
}

pub(crate) fn dense_backward_accumulate<T: Scalar>(
    grad_out: &Tensor<T>,
    input: &Tensor<T>,
    weights: &Tensor<T>,
    acc_weights: &mut Tensor<T>,
    acc_bias: &mut Tensor<T>,
    want_input_grad: bool,
) -> Result<Option<Tensor<T>>> {
    let (m, n) = check(input, weights)?;
    grad_out.expect_dims(&[m], "dense grad_out")?;
    acc_weights.expect_dims(weights.dims(), "dense weight accumulator")?;
    acc_bias.expect_dims(&[m], "dense bias accumulator")?;
    let (g, x) = (grad_out.data(), input.data());
    for ((row, &gv), gb) in acc_weights
        .data_mut()
        .chunks_exact_mut(n)
        .zip(g)
        .zip(acc_bias.data_mut())
    {
        *gb = *gb + gv;
        if gv != T::zero() {
            for (a, &xv) in row.iter_mut().zip(x) {
                *a = *a + gv * xv;
            }
        }
    }
    if !want_input_grad {
        return Ok(None);
    }
    let mut gi = vec![T::zero(); n];
    for (row, &gv) in weights.data().chunks_exact(n).zip(g) {
        if gv == T::zero() {
            continue;
        }
        for (a, &w) in gi.iter_mut().zip(row) {
            *a = *a + gv * w;
        }
    }
    Ok(Some(Tensor::new(&[n], gi)?))
}
