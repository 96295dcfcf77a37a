use serde::{Deserialize, Serialize};

use super::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Geometry of a 2-D convolution over `[C, H, W]` inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvParams {
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub stride: usize,
    pub padding: usize,
    pub bias: bool,
}

impl ConvParams {
    /// Square kernel with bias, padded so stride-1 output keeps the input size
    /// (odd kernels only).
    pub fn same(kernel: usize, in_channels: usize, out_channels: usize) -> Self {
        ConvParams {
            kernel_h: kernel,
            kernel_w: kernel,
            in_channels,
            out_channels,
            stride: 1,
            padding: kernel / 2,
            bias: true,
        }
    }

    pub fn new(
        kernel: usize,
        in_channels: usize,
        out_channels: usize,
        stride: usize,
        padding: usize,
    ) -> Self {
        ConvParams {
            kernel_h: kernel,
            kernel_w: kernel,
            in_channels,
            out_channels,
            stride,
            padding,
            bias: true,
        }
    }

    pub fn without_bias(mut self) -> Self {
        self.bias = false;
        self
    }

    pub fn weight_dims(&self) -> [usize; 4] {
        [self.out_channels, self.in_channels, self.kernel_h, self.kernel_w]
    }

    pub fn parameter_count(&self) -> usize {
        let bias = if self.bias { self.out_channels } else { 0 };
        self.kernel_h * self.kernel_w * self.in_channels * self.out_channels + bias
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel_h == 0
            || self.kernel_w == 0
            || self.in_channels == 0
            || self.out_channels == 0
            || self.stride == 0
        {
            return Err(Error::config(format!(
                "conv kernel, channels and stride must be positive: {self:?}"
            )));
        }
        Ok(())
    }

    /// Output spatial dims `floor((in + 2p - k) / s) + 1`.
    pub fn output_hw(&self, in_h: usize, in_w: usize) -> Result<(usize, usize)> {
        self.validate()?;
        let span_h = in_h + 2 * self.padding;
        let span_w = in_w + 2 * self.padding;
        if span_h < self.kernel_h || span_w < self.kernel_w {
            return Err(Error::config(format!(
                "conv {}x{} kernel with padding {} does not fit a {in_h}x{in_w} input",
                self.kernel_h, self.kernel_w, self.padding
            )));
        }
        Ok((
            (span_h - self.kernel_h) / self.stride + 1,
            (span_w - self.kernel_w) / self.stride + 1,
        ))
    }

    fn check_operands<T: Scalar>(
        &self,
        input: &Tensor<T>,
        weights: &Tensor<T>,
        bias: Option<&Tensor<T>>,
    ) -> Result<(usize, usize, usize, usize)> {
        input.expect_rank(3, "conv2d input")?;
        let [c, h, w] = [input.dims()[0], input.dims()[1], input.dims()[2]];
        if c != self.in_channels {
            return Err(Error::shape(format!(
                "conv2d: input has {c} channels, layer expects {}",
                self.in_channels
            )));
        }
        weights.expect_dims(&self.weight_dims(), "conv2d weights")?;
        match (bias, self.bias) {
            (Some(b), true) => b.expect_dims(&[self.out_channels], "conv2d bias")?,
            (None, false) => {}
            (Some(_), false) => return Err(Error::shape("conv2d: bias given to a bias-free layer")),
            (None, true) => return Err(Error::shape("conv2d: layer expects a bias tensor")),
        }
        let (oh, ow) = self.output_hw(h, w)?;
        Ok((h, w, oh, ow))
    }
}

/// Gradients of a convolution with respect to its three operands.
#[derive(Debug, Clone)]
pub struct ConvGrads<T> {
    pub input: Tensor<T>,
    pub weights: Tensor<T>,
    pub bias: Option<Tensor<T>>,
}

/// Unrolls input patches into a `[C*kh*kw, OH*OW]` matrix.
fn im2col<T: Scalar>(input: &[T], h: usize, w: usize, p: &ConvParams, oh: usize, ow: usize) -> Vec<T> {
    let (kh, kw, s, pad) = (p.kernel_h, p.kernel_w, p.stride, p.padding as isize);
    let cols = oh * ow;
    let mut out = vec![T::zero(); p.in_channels * kh * kw * cols];
    for c in 0..p.in_channels {
        let plane = &input[c * h * w..(c + 1) * h * w];
        for i in 0..kh {
            for j in 0..kw {
                let row = ((c * kh + i) * kw + j) * cols;
                let dst = &mut out[row..row + cols];
                for y in 0..oh {
                    let iy = (y * s + i) as isize - pad;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let src = &plane[iy as usize * w..(iy as usize + 1) * w];
                    for x in 0..ow {
                        let ix = (x * s + j) as isize - pad;
                        if ix >= 0 && ix < w as isize {
                            dst[y * ow + x] = src[ix as usize];
                        }
                    }
                }
            }
        }
    }
    out
}

/// Scatter-adds a `[C*kh*kw, OH*OW]` column matrix back onto the input grid.
fn col2im<T: Scalar>(cols_mat: &[T], h: usize, w: usize, p: &ConvParams, oh: usize, ow: usize) -> Vec<T> {
    let (kh, kw, s, pad) = (p.kernel_h, p.kernel_w, p.stride, p.padding as isize);
    let cols = oh * ow;
    let mut out = vec![T::zero(); p.in_channels * h * w];
    for c in 0..p.in_channels {
        let plane = &mut out[c * h * w..(c + 1) * h * w];
        for i in 0..kh {
            for j in 0..kw {
                let row = ((c * kh + i) * kw + j) * cols;
                let src = &cols_mat[row..row + cols];
                for y in 0..oh {
                    let iy = (y * s + i) as isize - pad;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let base = iy as usize * w;
                    for x in 0..ow {
                        let ix = (x * s + j) as isize - pad;
                        if ix >= 0 && ix < w as isize {
                            plane[base + ix as usize] = plane[base + ix as usize] + src[y * ow + x];
                        }
                    }
                }
            }
        }
    }
    out
}

/// Convolution via im2col and a single matrix product.
///
/// `out[o,y,x] = bias[o] + sum_{c,i,j} input[c, y*s+i-p, x*s+j-p] * w[o,c,i,j]`
/// with zero padding outside the input.
pub fn conv2d_forward<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    params: &ConvParams,
) -> Result<Tensor<T>> {
    let (h, w, oh, ow) = params.check_operands(input, weights, bias)?;
    let (o, k, n) = (
        params.out_channels,
        params.in_channels * params.kernel_h * params.kernel_w,
        oh * ow,
    );
    let mut out = vec![T::zero(); o * n];
    if let Some(b) = bias {
        for (row, &bv) in out.chunks_exact_mut(n).zip(b.data()) {
            row.fill(bv);
        }
    }
    // 1x1 stride-1 unpadded convolutions read the input directly.
    if params.kernel_h == 1 && params.kernel_w == 1 && params.stride == 1 && params.padding == 0 {
        T::gemm(o, k, n, weights.data(), k, 1, input.data(), n, 1, T::one(), &mut out);
    } else {
        let cols = im2col(input.data(), h, w, params, oh, ow);
        T::gemm(o, k, n, weights.data(), k, 1, &cols, n, 1, T::one(), &mut out);
    }
    Tensor::new(&[o, oh, ow], out)
}

/// Straight nested-loop convolution; the reference the im2col path is held to.
pub fn conv2d_forward_naive<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    params: &ConvParams,
) -> Result<Tensor<T>> {
    let (h, w, oh, ow) = params.check_operands(input, weights, bias)?;
    let (x, wt) = (input.data(), weights.data());
    let (kh, kw, s, pad) = (params.kernel_h, params.kernel_w, params.stride, params.padding as isize);
    let cin = params.in_channels;
    let mut out = Tensor::zeros(&[params.out_channels, oh, ow]);
    let od = out.data_mut();
    for o in 0..params.out_channels {
        for y in 0..oh {
            for xo in 0..ow {
                let mut acc = bias.map_or(T::zero(), |b| b.data()[o]);
                for c in 0..cin {
                    for i in 0..kh {
                        for j in 0..kw {
                            let iy = (y * s + i) as isize - pad;
                            let ix = (xo * s + j) as isize - pad;
                            if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                continue;
                            }
                            acc = acc
                                + x[(c * h + iy as usize) * w + ix as usize]
                                    * wt[((o * cin + c) * kh + i) * kw + j];
                        }
                    }
                }
                od[(o * oh + y) * ow + xo] = acc;
            }
        }
    }
    Ok(out)
}

/// Backward pass for [`conv2d_forward`]: gradients of `sum(grad_out * out)`.
pub fn conv2d_backward<T: Scalar>(
    grad_out: &Tensor<T>,
    input: &Tensor<T>,
    weights: &Tensor<T>,
    params: &ConvParams,
) -> Result<ConvGrads<T>> {
    let mut gw = Tensor::zeros(&params.weight_dims());
    let mut gb = params.bias.then(|| Tensor::zeros(&[params.out_channels]));
    let gi = conv2d_backward_accumulate(grad_out, input, weights, params, &mut gw, gb.as_mut(), true)?;
    Ok(ConvGrads {
        input: gi.expect("input gradient requested"),
        weights: gw,
        bias: gb,
    })
}

/// Adds weight/bias gradients into the accumulators and optionally returns
/// the input gradient.
pub(crate) fn conv2d_backward_accumulate<T: Scalar>(
    grad_out: &Tensor<T>,
    input: &Tensor<T>,
    weights: &Tensor<T>,
    params: &ConvParams,
    acc_weights: &mut Tensor<T>,
    acc_bias: Option<&mut Tensor<T>>,
    want_input_grad: bool,
) -> Result<Option<Tensor<T>>> {
    let bias_probe = params.bias.then(|| Tensor::zeros(&[params.out_channels]));
    let (h, w, oh, ow) = params.check_operands(input, weights, bias_probe.as_ref())?;
    grad_out.expect_dims(&[params.out_channels, oh, ow], "conv2d grad_out")?;
    acc_weights.expect_dims(&params.weight_dims(), "conv2d weight accumulator")?;
    let (o, k, n) = (
        params.out_channels,
        params.in_channels * params.kernel_h * params.kernel_w,
        oh * ow,
    );
    let g = grad_out.data();

    if let Some(gb) = acc_bias {
        gb.expect_dims(&[o], "conv2d bias accumulator")?;
        for (acc, row) in gb.data_mut().iter_mut().zip(g.chunks_exact(n)) {
            *acc = *acc + row.iter().fold(T::zero(), |s, &v| s + v);
        }
    }

    let pointwise = params.kernel_h == 1 && params.kernel_w == 1 && params.stride == 1 && params.padding == 0;
    let cols_owned;
    let cols: &[T] = if pointwise {
        input.data()
    } else {
        cols_owned = im2col(input.data(), h, w, params, oh, ow);
        &cols_owned
    };
    // grad_w[o, k] += sum_p g[o, p] * cols[k, p]
    T::gemm(o, n, k, g, n, 1, cols, 1, n, T::one(), acc_weights.data_mut());

    if !want_input_grad {
        return Ok(None);
    }
    // grad_cols[k, p] = sum_o w[o, k] * g[o, p]
    let mut grad_cols = vec![T::zero(); k * n];
    T::gemm(k, o, n, weights.data(), 1, k, g, n, 1, T::zero(), &mut grad_cols);
    let gi = if pointwise {
        grad_cols
    } else {
        col2im(&grad_cols, h, w, params, oh, ow)
    };
    Ok(Some(Tensor::new(&[params.in_channels, h, w], gi)?))
}

/// Nested-loop backward pass, kept as a reference for the im2col path.
pub fn conv2d_backward_naive<T: Scalar>(
    grad_out: &Tensor<T>,
    input: &Tensor<T>,
    weights: &Tensor<T>,
    params: &ConvParams,
) -> Result<ConvGrads<T>> {
    let bias_probe = params.bias.then(|| Tensor::zeros(&[params.out_channels]));
    let (h, w, oh, ow) = params.check_operands(input, weights, bias_probe.as_ref())?;
    grad_out.expect_dims(&[params.out_channels, oh, ow], "conv2d grad_out")?;
    let (kh, kw, s, pad) = (params.kernel_h, params.kernel_w, params.stride, params.padding as isize);
    let cin = params.in_channels;
    let (x, wt, g) = (input.data(), weights.data(), grad_out.data());
    let mut gi = Tensor::zeros(input.dims());
    let mut gw = Tensor::zeros(&params.weight_dims());
    let mut gb = params.bias.then(|| Tensor::zeros(&[params.out_channels]));
    for o in 0..params.out_channels {
        for y in 0..oh {
            for xo in 0..ow {
                let go = g[(o * oh + y) * ow + xo];
                if let Some(gb) = gb.as_mut() {
                    gb.data_mut()[o] = gb.data()[o] + go;
                }
                for c in 0..cin {
                    for i in 0..kh {
                        for j in 0..kw {
                            let iy = (y * s + i) as isize - pad;
                            let ix = (xo * s + j) as isize - pad;
                            if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                continue;
                            }
                            let xi = (c * h + iy as usize) * w + ix as usize;
                            let wi = ((o * cin + c) * kh + i) * kw + j;
                            gw.data_mut()[wi] = gw.data()[wi] + go * x[xi];
                            gi.data_mut()[xi] = gi.data()[xi] + go * wt[wi];
                        }
                    }
                }
            }
        }
    }
    Ok(ConvGrads {
        input: gi,
        weights: gw,
        bias: gb,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::RngState;

    fn random(dims: &[usize], rng: &mut RngState) -> Tensor<f64> {
        Tensor::from_fn(dims, |_| rng.uniform(-1.0, 1.0))
    }

    #[test]
    fn unit_pointwise_kernel_is_identity() {
        let mut rng = RngState::new(1);
        let x = random(&[1, 5, 4], &mut rng);
        let p = ConvParams::new(1, 1, 1, 1, 0);
        let w = Tensor::full(&[1, 1, 1, 1], 1.0);
        let b = Tensor::zeros(&[1]);
        let y = conv2d_forward(&x, &w, Some(&b), &p).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn zero_weights_give_constant_bias() {
        let mut rng = RngState::new(2);
        let x = random(&[2, 6, 6], &mut rng);
        let p = ConvParams::same(3, 2, 3);
        let w = Tensor::zeros(&p.weight_dims());
        let b = Tensor::from_slice(&[0.5, -1.0, 2.0]);
        let y = conv2d_forward(&x, &w, Some(&b), &p).unwrap();
        for o in 0..3 {
            assert!(y.data()[o * 36..(o + 1) * 36].iter().all(|&v| v == b.data()[o]));
        }
    }

    #[test]
    fn im2col_matches_naive_with_stride_and_padding() {
        let mut rng = RngState::new(3);
        for &(k, s, pad) in &[(3, 1, 1), (3, 2, 1), (5, 2, 2), (2, 2, 0), (7, 2, 3), (1, 2, 0)] {
            let p = ConvParams::new(k, 3, 4, s, pad);
            let x = random(&[3, 9, 8], &mut rng);
            let w = random(&p.weight_dims(), &mut rng);
            let b = random(&[4], &mut rng);
            let fast = conv2d_forward(&x, &w, Some(&b), &p).unwrap();
            let slow = conv2d_forward_naive(&x, &w, Some(&b), &p).unwrap();
            assert!(fast.max_abs_diff(&slow) < 1e-12, "k={k} s={s} p={pad}");

            let g = random(fast.dims(), &mut rng);
            let gf = conv2d_backward(&g, &x, &w, &p).unwrap();
            let gs = conv2d_backward_naive(&g, &x, &w, &p).unwrap();
            assert!(gf.input.max_abs_diff(&gs.input) < 1e-12);
            assert!(gf.weights.max_abs_diff(&gs.weights) < 1e-12);
            assert!(gf.bias.unwrap().max_abs_diff(&gs.bias.unwrap()) < 1e-12);
        }
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_gradients() {
        let mut rng = RngState::new(4);
        let p = ConvParams::same(3, 2, 2);
        let x = random(&[2, 4, 4], &mut rng);
        let w = random(&p.weight_dims(), &mut rng);
        let g = conv2d_backward(&Tensor::zeros(&[2, 4, 4]), &x, &w, &p).unwrap();
        assert!(g.input.data().iter().all(|&v| v == 0.0));
        assert!(g.weights.data().iter().all(|&v| v == 0.0));
        assert!(g.bias.unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bias_gradient_is_spatial_sum() {
        let mut rng = RngState::new(5);
        let p = ConvParams::new(3, 1, 2, 1, 0);
        let x = random(&[1, 5, 5], &mut rng);
        let w = random(&p.weight_dims(), &mut rng);
        let g = random(&[2, 3, 3], &mut rng);
        let grads = conv2d_backward(&g, &x, &w, &p).unwrap();
        for o in 0..2 {
            let s: f64 = g.data()[o * 9..(o + 1) * 9].iter().sum();
            assert!((grads.bias.as_ref().unwrap().data()[o] - s).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_and_geometry_errors() {
        let p = ConvParams::new(3, 2, 1, 1, 0);
        let w = Tensor::<f32>::zeros(&p.weight_dims());
        let b = Tensor::<f32>::zeros(&[1]);
        let wrong_channels = Tensor::<f32>::zeros(&[3, 5, 5]);
        assert!(matches!(
            conv2d_forward(&wrong_channels, &w, Some(&b), &p),
            Err(Error::Shape(_))
        ));
        let too_small = Tensor::<f32>::zeros(&[2, 2, 2]);
        assert!(matches!(
            conv2d_forward(&too_small, &w, Some(&b), &p),
            Err(Error::Config(_))
        ));
    }
}
