use std::path::Path;

use serde::{Deserialize, Serialize};

use super::image::{decode_image, ImageBuffer};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// BT.601 luma weights.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// `round(0.299 R + 0.587 G + 0.114 B)`.
pub fn to_grayscale(image: &ImageBuffer) -> Result<ImageBuffer> {
    if image.channels() != 3 {
        return Err(Error::shape(format!(
            "grayscale conversion needs 3 channels, got {}",
            image.channels()
        )));
    }
    let data = image
        .data()
        .chunks_exact(3)
        .map(|px| {
            let l = LUMA_WEIGHTS[0] * px[0] as f64 + LUMA_WEIGHTS[1] * px[1] as f64 + LUMA_WEIGHTS[2] * px[2] as f64;
            l.round().clamp(0.0, 255.0) as u8
        })
        .collect();
    ImageBuffer::new(1, image.height(), image.width(), data)
}

/// Replicates a single channel into RGB.
pub fn gray_to_rgb(image: &ImageBuffer) -> ImageBuffer {
    if image.channels() == 3 {
        return image.clone();
    }
    let data = image.data().iter().flat_map(|&v| [v, v, v]).collect();
    ImageBuffer::new(3, image.height(), image.width(), data).expect("same dims")
}

/// Source coordinate of output sample `i` under half-pixel-centred scaling,
/// clamped to the valid range: `(i + 0.5) * in / out - 0.5`.
pub fn source_coord(i: usize, input: usize, output: usize) -> f64 {
    let s = (i as f64 + 0.5) * input as f64 / output as f64 - 0.5;
    s.clamp(0.0, (input - 1) as f64)
}

/// Bilinear resize with half-pixel-centred sampling and edge clamping,
/// rounding to the nearest 8-bit value.
pub fn resize_bilinear(image: &ImageBuffer, out_h: usize, out_w: usize) -> Result<ImageBuffer> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::config(format!("resize target must be positive, got {out_h}x{out_w}")));
    }
    let (c, h, w) = (image.channels(), image.height(), image.width());
    if (h, w) == (out_h, out_w) {
        return Ok(image.clone());
    }
    let taps = |i: usize, input: usize, output: usize| {
        let s = source_coord(i, input, output);
        let i0 = s.floor() as usize;
        let i1 = (i0 + 1).min(input - 1);
        (i0, i1, s - i0 as f64)
    };
    let xs: Vec<_> = (0..out_w).map(|x| taps(x, w, out_w)).collect();
    let mut data = Vec::with_capacity(c * out_h * out_w);
    for y in 0..out_h {
        let (y0, y1, fy) = taps(y, h, out_h);
        for &(x0, x1, fx) in &xs {
            for ch in 0..c {
                let p = |yy: usize, xx: usize| image.get(ch, yy, xx) as f64;
                let top = p(y0, x0) + (p(y0, x1) - p(y0, x0)) * fx;
                let bottom = p(y1, x0) + (p(y1, x1) - p(y1, x0)) * fx;
                let v = top + (bottom - top) * fy;
                data.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    ImageBuffer::new(c, out_h, out_w, data)
}

/// `value / 255` into a channel-major `[C, H, W]` tensor.
pub fn normalize(image: &ImageBuffer) -> Tensor<f32> {
    let (c, h, w) = (image.channels(), image.height(), image.width());
    let mut data = vec![0.0f32; c * h * w];
    for (i, &v) in image.data().iter().enumerate() {
        let (pixel, ch) = (i / c, i % c);
        data[ch * h * w + pixel] = v as f32 / 255.0;
    }
    Tensor::new(&[c, h, w], data).expect("image dims are valid")
}

/// Decode -> colour conversion -> resize, producing the model's input image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Preprocess {
    pub height: usize,
    pub width: usize,
    pub grayscale: bool,
}

impl Preprocess {
    pub fn new(height: usize, width: usize, grayscale: bool) -> Self {
        Preprocess {
            height,
            width,
            grayscale,
        }
    }

    /// Matches a model input of `[channels, height, width]`.
    pub fn for_input(dims: [usize; 3]) -> Self {
        Preprocess::new(dims[1], dims[2], dims[0] == 1)
    }

    pub fn channels(&self) -> usize {
        if self.grayscale {
            1
        } else {
            3
        }
    }

    pub fn apply(&self, image: &ImageBuffer) -> Result<ImageBuffer> {
        let converted = match (self.grayscale, image.channels()) {
            (true, 3) => to_grayscale(image)?,
            (false, 1) => gray_to_rgb(image),
            _ => image.clone(),
        };
        resize_bilinear(&converted, self.height, self.width)
    }

    pub fn load(&self, path: impl AsRef<Path>) -> Result<ImageBuffer> {
        self.apply(&decode_image(path)?)
    }

    /// Full single-image path from file to model input.
    pub fn load_tensor(&self, path: impl AsRef<Path>) -> Result<Tensor<f32>> {
        Ok(normalize(&self.load(path)?))
    }
}
