use serde::{Deserialize, Serialize};

use super::{RngState, Scalar, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DropoutMode {
    Train,
    Infer,
}

/// Inverted dropout: survivors are scaled by `1 / (1 - rate)` at train time,
/// inference is the identity.
pub fn dropout<T: Scalar>(input: &Tensor<T>, rate: f64, mode: DropoutMode, rng: &mut RngState) -> Result<Tensor<T>> {
    Ok(dropout_with_mask(input, rate, mode, rng)?.0)
}

/// Like [`dropout`], also returning the per-element multiplier (0 or the
/// survivor scale) that the backward pass reuses.
pub fn dropout_with_mask<T: Scalar>(
    input: &Tensor<T>,
    rate: f64,
    mode: DropoutMode,
    rng: &mut RngState,
) -> Result<(Tensor<T>, Option<Vec<T>>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::config(format!("dropout rate must be in [0, 1), got {rate}")));
    }
    if mode == DropoutMode::Infer || rate == 0.0 {
        return Ok((input.clone(), None));
    }
    let keep = T::from_f64(1.0 / (1.0 - rate));
    let mask: Vec<T> = (0..input.len())
        .map(|_| if rng.next_f64() < rate { T::zero() } else { keep })
        .collect();
    let data = input.data().iter().zip(&mask).map(|(&x, &m)| x * m).collect();
    Ok((Tensor::new(input.dims(), data)?, Some(mask)))
}
