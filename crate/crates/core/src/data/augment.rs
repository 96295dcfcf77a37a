use serde::{Deserialize, Serialize};

use super::image::ImageBuffer;
use crate::error::{Error, Result};
use crate::tensor::RngState;

/// Ranges for the random label-preserving transforms applied to training
/// images.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentPolicy {
    pub rotation_deg_max: f64,
    pub shift_frac_max: f64,
    pub brightness_frac_max: f64,
    pub enabled: bool,
}

impl Default for AugmentPolicy {
    fn default() -> Self {
        AugmentPolicy {
            rotation_deg_max: 10.0,
            shift_frac_max: 0.1,
            brightness_frac_max: 0.1,
            enabled: true,
        }
    }
}

impl AugmentPolicy {
    pub fn disabled() -> Self {
        AugmentPolicy {
            enabled: false,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ranges = [self.rotation_deg_max, self.shift_frac_max, self.brightness_frac_max];
        if ranges.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::config(format!("augmentation ranges must be non-negative: {self:?}")));
        }
        Ok(())
    }

    /// Draws one transform: rotation, x shift, y shift, brightness, in that
    /// order.
    pub fn sample(&self, height: usize, width: usize, rng: &mut RngState) -> Transform {
        let r = self.rotation_deg_max;
        let sx = self.shift_frac_max * width as f64;
        let sy = self.shift_frac_max * height as f64;
        let b = self.brightness_frac_max;
        Transform {
            rotation_deg: rng.uniform(-r, r),
            shift_x: rng.uniform(-sx, sx),
            shift_y: rng.uniform(-sy, sy),
            brightness: rng.uniform(1.0 - b, 1.0 + b),
        }
    }
}

/// A concrete rotation (about the image centre), translation in pixels and
/// brightness factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transform {
    pub rotation_deg: f64,
    pub shift_x: f64,
    pub shift_y: f64,
    pub brightness: f64,
}

impl Transform {
    pub fn identity() -> Self {
        Transform {
            rotation_deg: 0.0,
            shift_x: 0.0,
            shift_y: 0.0,
            brightness: 1.0,
        }
    }

    /// Inverse-maps every output pixel into the source, samples bilinearly
    /// with edge replication, then scales brightness and rounds.
    pub fn apply(&self, image: &ImageBuffer) -> ImageBuffer {
        let (c, h, w) = (image.channels(), image.height(), image.width());
        let (sin, cos) = self.rotation_deg.to_radians().sin_cos();
        let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
        let clamp = |v: f64, n: usize| v.clamp(0.0, (n - 1) as f64);
        let mut data = Vec::with_capacity(image.data().len());
        for y in 0..h {
            for x in 0..w {
                let u = x as f64 - self.shift_x - cx;
                let v = y as f64 - self.shift_y - cy;
                let sx = clamp(cos * u + sin * v + cx, w);
                let sy = clamp(-sin * u + cos * v + cy, h);
                let (x0, y0) = (sx.floor() as usize, sy.floor() as usize);
                let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
                let (fx, fy) = (sx - x0 as f64, sy - y0 as f64);
                for ch in 0..c {
                    let p = |yy, xx| image.get(ch, yy, xx) as f64;
                    let top = p(y0, x0) + (p(y0, x1) - p(y0, x0)) * fx;
                    let bottom = p(y1, x0) + (p(y1, x1) - p(y1, x0)) * fx;
                    let val = (top + (bottom - top) * fy) * self.brightness;
                    data.push(val.round().clamp(0.0, 255.0) as u8);
                }
            }
        }
        ImageBuffer::new(c, h, w, data).expect("same dims")
    }
}

/// Applies a random transform drawn from `policy`; a disabled policy returns
/// the image unchanged without consuming randomness.
pub fn augment(image: &ImageBuffer, policy: &AugmentPolicy, rng: &mut RngState) -> ImageBuffer {
    if !policy.enabled {
        return image.clone();
    }
    policy.sample(image.height(), image.width(), rng).apply(image)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> ImageBuffer {
        ImageBuffer::from_fn(1, 4, 5, |_, y, x| (y * 40 + x * 9 + 3) as u8)
    }

    #[test]
    fn zero_policy_is_identity() {
        let policy = AugmentPolicy {
            rotation_deg_max: 0.0,
            shift_frac_max: 0.0,
            brightness_frac_max: 0.0,
            enabled: true,
        };
        let img = fixture();
        assert_eq!(augment(&img, &policy, &mut RngState::new(3)), img);
    }

    #[test]
    fn constant_image_survives_any_transform() {
        let img = ImageBuffer::filled(3, 16, 16, 120);
        let policy = AugmentPolicy {
            brightness_frac_max: 0.0,
            rotation_deg_max: 45.0,
            shift_frac_max: 0.3,
            enabled: true,
        };
        let mut rng = RngState::new(8);
        for _ in 0..20 {
            assert_eq!(augment(&img, &policy, &mut rng), img);
        }
    }

    #[test]
    fn one_pixel_shift_duplicates_edge_column() {
        let img = fixture();
        let t = Transform {
            shift_x: 1.0,
            ..Transform::identity()
        };
        let out = t.apply(&img);
        for y in 0..4 {
            assert_eq!(out.get(0, y, 0), img.get(0, y, 0));
            for x in 1..5 {
                assert_eq!(out.get(0, y, x), img.get(0, y, x - 1));
            }
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let img = fixture();
        let p = AugmentPolicy::default();
        assert_eq!(augment(&img, &p, &mut RngState::new(5)), augment(&img, &p, &mut RngState::new(5)));
        assert!(AugmentPolicy {
            rotation_deg_max: -1.0,
            ..p
        }
        .validate()
        .is_err());
    }
}
