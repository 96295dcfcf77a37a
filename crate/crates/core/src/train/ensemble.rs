use crate::error::{Error, Result};
use crate::model::ModelGraph;
use crate::tensor::Tensor;

/// Weight-normalised average of probability vectors, accumulated in f64.
/// `weights = None` means uniform.
pub fn combine_probabilities(outputs: &[Tensor<f32>], weights: Option<&[f64]>) -> Result<Tensor<f32>> {
    let first = outputs.first().ok_or_else(|| Error::config("ensemble needs at least one member"))?;
    let uniform;
    let w = match weights {
        Some(w) => w,
        None => {
            uniform = vec![1.0; outputs.len()];
            &uniform
        }
    };
    if w.len() != outputs.len() {
        return Err(Error::config(format!(
            "{} ensemble weights for {} members",
            w.len(),
            outputs.len()
        )));
    }
    if w.iter().any(|v| !v.is_finite() || *v < 0.0) || w.iter().all(|v| *v == 0.0) {
        return Err(Error::config("ensemble weights must be non-negative and not all zero"));
    }
    let total: f64 = w.iter().sum();
    let mut acc = vec![0.0f64; first.len()];
    for (out, &wi) in outputs.iter().zip(w) {
        out.expect_dims(first.dims(), "ensemble member output")?;
        for (a, &p) in acc.iter_mut().zip(out.data()) {
            *a += wi * p as f64;
        }
    }
    Tensor::new(first.dims(), acc.into_iter().map(|a| (a / total) as f32).collect())
}

/// Runs every member on `input` and combines their softmax outputs.
pub fn ensemble_predict(models: &[&ModelGraph], weights: Option<&[f64]>, input: &Tensor<f32>) -> Result<Tensor<f32>> {
    if models.is_empty() {
        return Err(Error::config("ensemble needs at least one member"));
    }
    let outputs = models.iter().map(|m| m.forward(input)).collect::<Result<Vec<_>>>()?;
    combine_probabilities(&outputs, weights)
}
