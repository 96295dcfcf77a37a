//! Synthetic ten-class corpus standing in for real driver images.
//!
//! Each image is a driver-specific background (base level plus a striped
//! texture), a bright square "pose" block whose position encodes the class,
//! and optional Gaussian noise. Class `k` places its block in cell
//! `(k / 5, k % 5)` of a 2 x 5 grid. Two knobs create identity leakage:
//! `pose_jitter` moves each (driver, class) block by a fixed random offset,
//! and `clutter` adds a bright (driver, class)-specific distractor patch.
//! Both are constant across a driver's images of one class, like frames
//! from one recording session.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::image::{encode_image, ImageBuffer};
use super::manifest::{ClassLabel, DatasetIndex, DatasetRow};
use crate::error::{Error, Result};
use crate::tensor::RngState;
use crate::NUM_CLASSES;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub num_drivers: usize,
    pub images_per_class: usize,
    /// Square image side in pixels.
    pub size: usize,
    pub seed: u64,
    /// Intensity added inside the class block.
    pub block_contrast: f64,
    /// Amplitude of the driver's background stripes.
    pub background_strength: f64,
    /// Max per-(driver, class) block displacement as a fraction of `size`.
    pub pose_jitter: f64,
    /// Intensity of the per-(driver, class) distractor patch (0 = none).
    pub clutter: f64,
    /// Std of per-pixel Gaussian noise.
    pub noise_std: f64,
}

impl SynthConfig {
    pub fn new(num_drivers: usize, images_per_class: usize, seed: u64) -> Self {
        SynthConfig {
            num_drivers,
            images_per_class,
            size: 64,
            seed,
            block_contrast: 110.0,
            background_strength: 20.0,
            pose_jitter: 0.0,
            clutter: 0.0,
            noise_std: 8.0,
        }
    }

    /// A corpus where driver identity is a strong shortcut: large
    /// per-session pose offsets, bright session clutter and weak blocks.
    pub fn leaky(num_drivers: usize, images_per_class: usize, seed: u64) -> Self {
        SynthConfig {
            block_contrast: 45.0,
            background_strength: 45.0,
            pose_jitter: 0.3,
            clutter: 120.0,
            noise_std: 6.0,
            ..Self::new(num_drivers, images_per_class, seed)
        }
    }

    pub fn noiseless(mut self) -> Self {
        self.noise_std = 0.0;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.num_drivers == 0 || self.images_per_class == 0 {
            return Err(Error::config("synthetic corpus needs at least one driver and one image per class"));
        }
        if self.size < 16 {
            return Err(Error::config(format!("synthetic image size must be >= 16, got {}", self.size)));
        }
        Ok(())
    }
}

/// Top-left corner of class `k`'s block and the block side.
pub fn class_block(k: usize, size: usize) -> (usize, usize, usize) {
    let cell_w = size / 5;
    let cell_h = size / 2;
    let side = (cell_w * 3 / 5).max(2);
    let x = (k % 5) * cell_w + (cell_w - side) / 2;
    let y = (k / 5) * cell_h + (cell_h - side) / 2;
    (y, x, side)
}

struct DriverStyle {
    base: f64,
    freq: f64,
    angle: f64,
    phase: f64,
}

struct Session {
    dy: isize,
    dx: isize,
    clutter_y: usize,
    clutter_x: usize,
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub index: DatasetIndex,
    /// Grayscale images aligned with `index.rows()`.
    pub images: Vec<ImageBuffer>,
}

pub fn driver_id(d: usize) -> String {
    format!("p{:03}", d + 1)
}

/// Generates the corpus in memory. Rows are ordered driver-major, then
/// class, then image.
pub fn synth_dataset(config: &SynthConfig) -> Result<SynthCorpus> {
    config.validate()?;
    let size = config.size;
    let root = RngState::new(config.seed);
    let mut rows = Vec::new();
    let mut images = Vec::new();
    let max_shift = (config.pose_jitter * size as f64).round() as isize;
    for d in 0..config.num_drivers {
        let mut drng = root.fork(d as u64);
        let style = DriverStyle {
            base: drng.uniform(40.0, 90.0),
            freq: drng.uniform(0.15, 0.6),
            angle: drng.uniform(0.0, std::f64::consts::PI),
            phase: drng.uniform(0.0, std::f64::consts::TAU),
        };
        let (sa, ca) = style.angle.sin_cos();
        let background: Vec<f64> = (0..size * size)
            .map(|i| {
                let (y, x) = ((i / size) as f64, (i % size) as f64);
                style.base + config.background_strength * (style.freq * (x * ca + y * sa) + style.phase).sin()
            })
            .collect();
        for k in 0..NUM_CLASSES {
            let label = ClassLabel::new(k)?;
            let mut srng = root.fork(((d as u64) << 8 | k as u64) ^ 0xC1A55);
            let (by, bx, side) = class_block(k, size);
            let session = Session {
                dy: if max_shift > 0 { srng.below(2 * max_shift as usize + 1) as isize - max_shift } else { 0 },
                dx: if max_shift > 0 { srng.below(2 * max_shift as usize + 1) as isize - max_shift } else { 0 },
                clutter_y: srng.below(size - side),
                clutter_x: srng.below(size - side),
            };
            let clamp = |v: isize| v.clamp(0, (size - side) as isize) as usize;
            let (by, bx) = (clamp(by as isize + session.dy), clamp(bx as isize + session.dx));
            for i in 0..config.images_per_class {
                let mut nrng = root.fork(((d as u64) << 32) | ((k as u64) << 20) | i as u64);
                let mut px = background.clone();
                for y in by..by + side {
                    for x in bx..bx + side {
                        px[y * size + x] += config.block_contrast;
                    }
                }
                if config.clutter > 0.0 {
                    for y in session.clutter_y..session.clutter_y + side {
                        for x in session.clutter_x..session.clutter_x + side {
                            px[y * size + x] += config.clutter;
                        }
                    }
                }
                if config.noise_std > 0.0 {
                    for v in &mut px {
                        *v += nrng.normal(0.0, config.noise_std);
                    }
                }
                let data = px.iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect();
                images.push(ImageBuffer::new(1, size, size, data)?);
                rows.push(DatasetRow::new(
                    driver_id(d),
                    label,
                    format!("img_{}_{}_{}.pgm", d + 1, k, i),
                ));
            }
        }
    }
    Ok(SynthCorpus {
        index: DatasetIndex::from_rows(rows),
        images,
    })
}

impl SynthCorpus {
    /// Writes `<dir>/<class>/<img>` PGM files and `<dir>/driver_imgs_list.csv`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        for label in ClassLabel::all() {
            fs::create_dir_all(dir.join(label.name()))?;
        }
        for (row, img) in self.index.rows().iter().zip(&self.images) {
            encode_image(img, dir.join(&row.path))?;
        }
        self.index.write_manifest(dir.join(MANIFEST_NAME))
    }
}

pub const MANIFEST_NAME: &str = "driver_imgs_list.csv";

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_positions_are_distinct_and_inside() {
        let mut seen = std::collections::HashSet::new();
        for k in 0..NUM_CLASSES {
            let (y, x, side) = class_block(k, 64);
            assert!(y + side <= 64 && x + side <= 64);
            assert!(seen.insert((y, x)));
        }
    }

    #[test]
    fn same_seed_same_corpus() {
        let cfg = SynthConfig::new(2, 2, 77);
        let a = synth_dataset(&cfg).unwrap();
        let b = synth_dataset(&cfg).unwrap();
        assert_eq!(a.images, b.images);
        assert_eq!(a.index, b.index);
        assert_eq!(a.index.len(), 40);
        let c = synth_dataset(&SynthConfig::new(2, 2, 78)).unwrap();
        assert_ne!(a.images, c.images);
    }

    #[test]
    fn rejects_empty_config() {
        assert!(synth_dataset(&SynthConfig::new(0, 1, 0)).is_err());
        assert!(synth_dataset(&SynthConfig::new(1, 0, 0)).is_err());
    }
}
