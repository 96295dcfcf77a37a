use serde::{Deserialize, Serialize};

use super::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Max-pooling window geometry.
///
/// With `ceil_mode` the last partial window is kept, which is the same as
/// replicating the last row/column before pooling. The 2x2 stride-2 pool
/// uses it so odd inputs are handled without dropping a row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolParams {
    pub window: usize,
    pub stride: usize,
    pub padding: usize,
    pub ceil_mode: bool,
}

impl Default for PoolParams {
    fn default() -> Self {
        PoolParams::two_by_two()
    }
}

impl PoolParams {
    pub fn two_by_two() -> Self {
        PoolParams {
            window: 2,
            stride: 2,
            padding: 0,
            ceil_mode: true,
        }
    }

    pub fn new(window: usize, stride: usize, padding: usize) -> Self {
        PoolParams {
            window,
            stride,
            padding,
            ceil_mode: false,
        }
    }

    pub fn output_hw(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        if self.window == 0 || self.stride == 0 || self.padding >= self.window {
            return Err(Error::config(format!("invalid pool geometry {self:?}")));
        }
        let dim = |n: usize| -> Result<usize> {
            let span = n + 2 * self.padding;
            if span < self.window {
                return Err(Error::config(format!(
                    "pool window {} does not fit extent {n}",
                    self.window
                )));
            }
            let rem = (span - self.window) % self.stride;
            let extra = usize::from(self.ceil_mode && rem != 0);
            Ok((span - self.window) / self.stride + 1 + extra)
        };
        Ok((dim(h)?, dim(w)?))
    }
}

/// Pooled values and, per output element, the flat input index it came from.
#[derive(Debug, Clone)]
pub struct PoolOutput<T> {
    pub output: Tensor<T>,
    pub argmax: Vec<usize>,
}

/// Max pool over `[C, H, W]`; ties go to the first maximum in row-major order.
pub fn maxpool2d<T: Scalar>(input: &Tensor<T>, params: &PoolParams) -> Result<PoolOutput<T>> {
    input.expect_rank(3, "maxpool input")?;
    let (c, h, w) = (input.dims()[0], input.dims()[1], input.dims()[2]);
    let (oh, ow) = params.output_hw(h, w)?;
    let x = input.data();
    let mut out = Vec::with_capacity(c * oh * ow);
    let mut argmax = Vec::with_capacity(c * oh * ow);
    let pad = params.padding as isize;
    for ch in 0..c {
        let base = ch * h * w;
        for y in 0..oh {
            let y0 = (y * params.stride) as isize - pad;
            let ys = y0.max(0) as usize..((y0 + params.window as isize).min(h as isize)) as usize;
            for xo in 0..ow {
                let x0 = (xo * params.stride) as isize - pad;
                let xs = x0.max(0) as usize..((x0 + params.window as isize).min(w as isize)) as usize;
                let mut best_idx = usize::MAX;
                let mut best = T::neg_infinity();
                for iy in ys.clone() {
                    for ix in xs.clone() {
                        let idx = base + iy * w + ix;
                        if best_idx == usize::MAX || x[idx] > best {
                            best = x[idx];
                            best_idx = idx;
                        }
                    }
                }
                debug_assert!(best_idx != usize::MAX, "empty pooling window");
                out.push(best);
                argmax.push(best_idx);
            }
        }
    }
    Ok(PoolOutput {
        output: Tensor::new(&[c, oh, ow], out)?,
        argmax,
    })
}

/// Routes each output gradient to the input position recorded in `argmax`.
pub fn maxpool2d_backward<T: Scalar>(
    grad_out: &Tensor<T>,
    argmax: &[usize],
    input_dims: &[usize],
) -> Result<Tensor<T>> {
    if grad_out.len() != argmax.len() {
        return Err(Error::shape(format!(
            "maxpool backward: {} gradients for {} argmax entries",
            grad_out.len(),
            argmax.len()
        )));
    }
    let mut gi = Tensor::zeros(input_dims);
    let n = gi.len();
    let gd = gi.data_mut();
    for (&g, &idx) in grad_out.data().iter().zip(argmax) {
        if idx >= n {
            return Err(Error::shape(format!("maxpool backward: argmax {idx} out of range")));
        }
        gd[idx] = gd[idx] + g;
    }
    Ok(gi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_routes_to_maximum() {
        let x = Tensor::new(&[1, 2, 2], vec![1.0f64, 2.0, 3.0, 4.0]).unwrap();
        let pooled = maxpool2d(&x, &PoolParams::two_by_two()).unwrap();
        assert_eq!(pooled.output.data(), &[4.0]);
        let g = maxpool2d_backward(&Tensor::full(&[1, 1, 1], 1.0), &pooled.argmax, x.dims()).unwrap();
        assert_eq!(g.data(), &[0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn constant_input_gives_constant_output_and_first_tie() {
        let x = Tensor::full(&[2, 4, 4], 3.5f32);
        let pooled = maxpool2d(&x, &PoolParams::two_by_two()).unwrap();
        assert_eq!(pooled.output.dims(), &[2, 2, 2]);
        assert!(pooled.output.data().iter().all(|&v| v == 3.5));
        // Top-left element of each window wins ties.
        assert_eq!(&pooled.argmax[..4], &[0, 2, 8, 10]);
    }

    #[test]
    fn odd_input_replicates_last_row_and_column() {
        let x = Tensor::new(&[1, 3, 3], (1..=9).map(f64::from).collect()).unwrap();
        let pooled = maxpool2d(&x, &PoolParams::two_by_two()).unwrap();
        assert_eq!(pooled.output.dims(), &[1, 2, 2]);
        assert_eq!(pooled.output.data(), &[5.0, 6.0, 8.0, 9.0]);
    }

    #[test]
    fn padded_three_by_three_stride_two() {
        let p = PoolParams::new(3, 2, 1);
        assert_eq!(p.output_hw(112, 112).unwrap(), (56, 56));
        assert_eq!(p.output_hw(7, 7).unwrap(), (4, 4));
        let x = Tensor::new(&[1, 2, 2], vec![-1.0f32, -2.0, -3.0, -4.0]).unwrap();
        let pooled = maxpool2d(&x, &p).unwrap();
        assert_eq!(pooled.output.data(), &[-1.0]);
    }
}
