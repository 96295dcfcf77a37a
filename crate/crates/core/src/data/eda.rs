use std::path::Path;

use super::image::ImageBuffer;
use super::manifest::{ClassLabel, DatasetIndex};
use super::preprocess::Preprocess;
use crate::error::{Error, Result};

/// Floating-point image, same `HWC` layout as [`ImageBuffer`].
#[derive(Debug, Clone, PartialEq)]
pub struct FloatImage {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl FloatImage {
    /// Rounds and clamps into 8 bits.
    pub fn to_u8(&self) -> ImageBuffer {
        let data = self.data.iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect();
        ImageBuffer::new(self.channels, self.height, self.width, data).expect("valid dims")
    }

    fn dims(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }
}

/// Per-pixel mean, accumulated in f64.
pub fn average_of<'a>(images: impl IntoIterator<Item = &'a ImageBuffer>) -> Result<FloatImage> {
    let mut acc: Option<FloatImage> = None;
    let mut n = 0usize;
    for img in images {
        let a = acc.get_or_insert_with(|| FloatImage {
            channels: img.channels(),
            height: img.height(),
            width: img.width(),
            data: vec![0.0; img.data().len()],
        });
        if a.dims() != (img.channels(), img.height(), img.width()) {
            return Err(Error::shape(format!(
                "average image: {}x{}x{} image in a {:?} set",
                img.channels(),
                img.height(),
                img.width(),
                a.dims()
            )));
        }
        for (s, &v) in a.data.iter_mut().zip(img.data()) {
            *s += v as f64;
        }
        n += 1;
    }
    let mut avg = acc.ok_or_else(|| Error::data("average image of an empty class"))?;
    for v in &mut avg.data {
        *v /= n as f64;
    }
    Ok(avg)
}

/// Average preprocessed image of one class read from `<root>/<row path>`.
pub fn average_image(index: &DatasetIndex, root: &Path, label: ClassLabel, preprocess: &Preprocess) -> Result<FloatImage> {
    let images = index
        .rows()
        .iter()
        .filter(|r| r.label == label)
        .map(|r| preprocess.load(root.join(&r.path)))
        .collect::<Result<Vec<_>>>()?;
    if images.is_empty() {
        return Err(Error::data(format!("class {label} has no images")));
    }
    average_of(&images)
}

/// Signed difference of two averages plus an 8-bit min-max rescaled view.
/// A constant difference maps to the all-zero image.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffImage {
    pub raw: FloatImage,
    pub visual: ImageBuffer,
}

pub fn diff_image(a: &FloatImage, b: &FloatImage) -> Result<DiffImage> {
    if a.dims() != b.dims() {
        return Err(Error::shape(format!(
            "difference image needs equal dims, got {:?} and {:?}",
            a.dims(),
            b.dims()
        )));
    }
    let data: Vec<f64> = a.data.iter().zip(&b.data).map(|(x, y)| x - y).collect();
    let lo = data.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let visual: Vec<u8> = if hi > lo {
        data.iter()
            .map(|v| ((v - lo) / (hi - lo) * 255.0).round() as u8)
            .collect()
    } else {
        vec![0; data.len()]
    };
    Ok(DiffImage {
        visual: ImageBuffer::new(a.channels, a.height, a.width, visual)?,
        raw: FloatImage { data, ..a.clone() },
    })
}
