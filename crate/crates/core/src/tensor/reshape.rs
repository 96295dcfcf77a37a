use super::{Scalar, Tensor};
use crate::error::Result;

/// Rank-1 view in row-major order.
pub fn flatten<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    Tensor::new(&[input.len()], input.data().to_vec()).expect("flatten keeps length")
}

/// Per-channel spatial mean of a `[C, H, W]` tensor.
pub fn global_average_pool<T: Scalar>(input: &Tensor<T>) -> Result<Tensor<T>> {
    input.expect_rank(3, "global average pool input")?;
    let c = input.dims()[0];
    let hw = input.len() / c;
    let denom = T::from_f64(hw as f64);
    let data = input
        .data()
        .chunks_exact(hw)
        .map(|plane| plane.iter().fold(T::zero(), |s, &v| s + v) / denom)
        .collect();
    Tensor::new(&[c], data)
}

pub fn global_average_pool_backward<T: Scalar>(grad_out: &Tensor<T>, input_dims: &[usize]) -> Result<Tensor<T>> {
    grad_out.expect_dims(&[input_dims[0]], "global average pool grad_out")?;
    let hw: usize = input_dims[1..].iter().product();
    let denom = T::from_f64(hw as f64);
    let mut gi = Tensor::zeros(input_dims);
    for (plane, &g) in gi.data_mut().chunks_exact_mut(hw).zip(grad_out.data()) {
        plane.fill(g / denom);
    }
    Ok(gi)
}
